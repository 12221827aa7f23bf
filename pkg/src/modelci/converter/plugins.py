"""Converter plugin registry.

Plugins are keyed by (source framework, target format). Builtin plugins are
Python callables over blob bytes; external-command plugins run a subprocess
with {input}/{output} placeholders substituted by file paths, exit 0 meaning
success. External toolchain plugins (TorchScript, ONNX, SavedModel,
TensorRT, ...) are declared this way in the daemon config; only the toy
builtins ship enabled by default.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from modelci.converter import toyformat
from modelci.errors import (
    ConversionTimeout,
    DuplicatePlugin,
    InvalidPlugin,
    PluginFailure,
    UnsupportedConversion,
)

DEFAULT_TIMEOUT_S = 300.0


@dataclass
class ConverterPlugin:
    source_framework: str
    target_format: str
    kind: str = "builtin"  # "builtin" | "external-command"
    command_template: str = ""
    produces_backends: list[str] = field(default_factory=list)
    func: Optional[Callable[[bytes], bytes]] = None
    timeout_s: float = DEFAULT_TIMEOUT_S

    @property
    def key(self) -> tuple[str, str]:
        return (self.source_framework, self.target_format)

    def validate(self) -> None:
        if not self.source_framework or not self.target_format:
            raise InvalidPlugin("plugin needs source_framework and target_format")
        if self.kind == "builtin":
            if self.func is None:
                raise InvalidPlugin(f"builtin plugin {self.key} needs a callable")
        elif self.kind == "external-command":
            if "{input}" not in self.command_template:
                raise InvalidPlugin(f"plugin {self.key}: command template lacks {{input}}")
            if "{output}" not in self.command_template:
                raise InvalidPlugin(f"plugin {self.key}: command template lacks {{output}}")
        else:
            raise InvalidPlugin(f"unknown plugin kind '{self.kind}'")

    def run(self, data: bytes) -> bytes:
        if self.kind == "builtin":
            try:
                return self.func(data)
            except PluginFailure:
                raise
            except Exception as exc:
                raise PluginFailure(f"builtin {self.key} failed: {exc}") from exc
        return self._run_external(data)

    def _run_external(self, data: bytes) -> bytes:
        # hermetic: the command sees only its own scratch dir with the
        # input file, and must create the output file
        with tempfile.TemporaryDirectory(prefix="modelci-convert-") as tmp:
            in_path = Path(tmp) / "input.bin"
            out_path = Path(tmp) / "output.bin"
            in_path.write_bytes(data)
            argv = [
                token.replace("{input}", str(in_path)).replace("{output}", str(out_path))
                for token in shlex.split(self.command_template)
            ]
            try:
                proc = subprocess.run(
                    argv, cwd=tmp, capture_output=True, timeout=self.timeout_s
                )
            except subprocess.TimeoutExpired as exc:
                raise ConversionTimeout(
                    f"plugin {self.key} exceeded {self.timeout_s}s"
                ) from exc
            except OSError as exc:
                raise PluginFailure(f"plugin {self.key} could not start: {exc}") from exc
            if proc.returncode != 0:
                stderr = proc.stderr.decode(errors="replace").strip()[-500:]
                raise PluginFailure(
                    f"plugin {self.key} exited {proc.returncode}: {stderr}"
                )
            if not out_path.exists() or out_path.stat().st_size == 0:
                raise PluginFailure(f"plugin {self.key} produced no output")
            return out_path.read_bytes()


@dataclass
class ConversionStep:
    plugin: ConverterPlugin
    target_format: str


@dataclass
class ConversionPlan:
    record_id: str
    steps: list[ConversionStep]


class PluginRegistry:
    def __init__(self):
        self._plugins: dict[tuple[str, str], ConverterPlugin] = {}

    def register(self, plugin: ConverterPlugin) -> None:
        plugin.validate()
        if plugin.key in self._plugins:
            raise DuplicatePlugin(f"plugin for {plugin.key} already registered")
        self._plugins[plugin.key] = plugin

    def lookup(self, source_framework: str, target_format: str) -> ConverterPlugin:
        plugin = self._plugins.get((source_framework, target_format))
        if plugin is None:
            raise UnsupportedConversion(
                f"no plugin converts {source_framework} -> {target_format}"
            )
        return plugin

    def for_source(self, source_framework: str) -> list[ConverterPlugin]:
        return sorted(
            (p for p in self._plugins.values() if p.source_framework == source_framework),
            key=lambda p: p.target_format,
        )

    def __len__(self) -> int:
        return len(self._plugins)


def _toy_to_binary(data: bytes) -> bytes:
    return toyformat.encode_binary(toyformat.parse_json(data))


def _toy_passthrough(data: bytes) -> bytes:
    toyformat.parse_json(data)  # validate only; bytes stay identical
    return data


def builtin_toy_plugins() -> list[ConverterPlugin]:
    """The deterministic toy converter pair enabled by default."""
    return [
        ConverterPlugin(
            source_framework="toy",
            target_format="toy-binary",
            kind="builtin",
            produces_backends=["mockserve"],
            func=_toy_to_binary,
        ),
        ConverterPlugin(
            source_framework="toy",
            target_format="toy-json",
            kind="builtin",
            produces_backends=["mockserve"],
            func=_toy_passthrough,
        ),
    ]
