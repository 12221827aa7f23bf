"""Converter checks: plugin registry, planning, conversion pipeline."""

import random
import sys

import pytest

from modelci.converter import Converter, ConverterPlugin, PluginRegistry
from modelci.converter.plugins import builtin_toy_plugins
from modelci.converter import toyformat
from modelci.errors import (
    ConversionTimeout,
    DuplicatePlugin,
    InvalidPlugin,
    PluginFailure,
    UnsupportedConversion,
)
from modelci.registry import FileStore, ModelRegistry

from test_registry import make_manifest
from test_toyformat import random_graph


@pytest.fixture
def registry(tmp_path):
    return ModelRegistry(FileStore(tmp_path / "store"))


@pytest.fixture
def plugins():
    reg = PluginRegistry()
    for p in builtin_toy_plugins():
        reg.register(p)
    return reg


@pytest.fixture
def converter(registry, plugins):
    return Converter(registry, plugins)


def register_toy(registry, graph=None, **kwargs) -> tuple:
    rng = random.Random(1234)
    graph = graph or random_graph(rng)
    record = registry.register(make_manifest(**kwargs), toyformat.canonical_json(graph))
    return record, graph


class TestPluginRegistry:
    def test_lookup_after_register(self, plugins):
        assert plugins.lookup("toy", "toy-binary").target_format == "toy-binary"

    def test_duplicate_key(self, plugins):
        with pytest.raises(DuplicatePlugin):
            plugins.register(builtin_toy_plugins()[0])

    def test_external_template_must_have_output(self):
        reg = PluginRegistry()
        with pytest.raises(InvalidPlugin):
            reg.register(ConverterPlugin(
                source_framework="x", target_format="y",
                kind="external-command", command_template="convert {input}",
            ))

    def test_builtin_needs_callable(self):
        reg = PluginRegistry()
        with pytest.raises(InvalidPlugin):
            reg.register(ConverterPlugin(source_framework="x", target_format="y"))

    def test_for_source_sorted(self, plugins):
        formats = [p.target_format for p in plugins.for_source("toy")]
        assert formats == sorted(formats) == ["toy-binary", "toy-json"]


class TestPlan:
    def test_default_fans_out_to_all_plugins(self, converter, registry):
        record, _ = register_toy(registry)
        plan = converter.plan(record)
        assert [s.target_format for s in plan.steps] == ["toy-binary", "toy-json"]

    def test_missing_target(self, converter, registry):
        record, _ = register_toy(registry)
        with pytest.raises(UnsupportedConversion):
            converter.plan(record, ["tensorrt"])

    def test_explicit_targets(self, converter, registry):
        record, _ = register_toy(registry)
        plan = converter.plan(record, ["toy-binary"])
        assert [s.target_format for s in plan.steps] == ["toy-binary"]


class TestConvert:
    def test_passthrough_preserves_digest(self, converter, registry):
        record, _ = register_toy(registry)
        variant = converter.convert(record, "toy-json")
        assert variant.blob_digest == record.weight_digest
        assert registry.get(record.id).status == "converted"

    def test_binary_variant_round_trips(self, converter, registry):
        record, graph = register_toy(registry)
        variant = converter.convert(record, "toy-binary")
        blob = registry.get_blob(variant.blob_digest)
        assert toyformat.canonical_json(toyformat.decode_binary(blob)) == \
            toyformat.canonical_json(graph)
        assert variant.serving_backends == ["mockserve"]

    def test_builtin_deterministic_digest(self, converter, registry):
        record1, graph = register_toy(registry, name="m1")
        record2, _ = register_toy(registry, graph=graph, name="m2")
        v1 = converter.convert(record1, "toy-binary")
        v2 = converter.convert(record2, "toy-binary")
        assert v1.blob_digest == v2.blob_digest

    def test_round_trip_hundred_random_graphs(self, converter, registry):
        rng = random.Random(0xCAFE)
        for i in range(100):
            graph = random_graph(rng)
            record = registry.register(
                make_manifest(name=f"rt{i}"), toyformat.canonical_json(graph))
            variant = converter.convert(record, "toy-binary")
            decoded = toyformat.decode_binary(registry.get_blob(variant.blob_digest))
            assert toyformat.canonical_json(decoded) == toyformat.canonical_json(graph)

    def test_external_plugin_happy_path(self, registry, plugins, tmp_path):
        plugins.register(ConverterPlugin(
            source_framework="toy", target_format="toy-upper",
            kind="external-command",
            command_template=(
                f"{sys.executable} -c "
                "\"import sys,pathlib;"
                "d=pathlib.Path(sys.argv[1]).read_bytes();"
                "pathlib.Path(sys.argv[2]).write_bytes(d.upper())\" {input} {output}"
            ),
            produces_backends=["mockserve"],
        ))
        converter = Converter(registry, plugins)
        record = registry.register(make_manifest(), b"abc")
        variant = converter.convert(record, "toy-upper")
        assert registry.get_blob(variant.blob_digest) == b"ABC"

    def test_external_plugin_nonzero_exit(self, registry, plugins):
        plugins.register(ConverterPlugin(
            source_framework="toy", target_format="broken",
            kind="external-command",
            command_template=f"{sys.executable} -c \"import sys;sys.exit(1)\" {{input}} {{output}}",
        ))
        converter = Converter(registry, plugins)
        record = registry.register(make_manifest(), b"abc")
        with pytest.raises(PluginFailure):
            converter.convert(record, "broken")
        assert registry.get(record.id).status == "failed"

    def test_external_plugin_timeout(self, registry, plugins):
        plugins.register(ConverterPlugin(
            source_framework="toy", target_format="slow",
            kind="external-command",
            command_template=f"{sys.executable} -c \"import time;time.sleep(30)\" {{input}} {{output}}",
            timeout_s=0.5,
        ))
        converter = Converter(registry, plugins)
        record = registry.register(make_manifest(), b"abc")
        with pytest.raises(ConversionTimeout):
            converter.convert(record, "slow")

    def test_failure_leaves_source_and_variants_intact(self, registry, plugins):
        converter = Converter(registry, plugins)
        record, _ = register_toy(registry)
        good = converter.convert(record, "toy-binary")
        plugins.register(ConverterPlugin(
            source_framework="toy", target_format="bad",
            kind="external-command",
            command_template=f"{sys.executable} -c \"import sys;sys.exit(2)\" {{input}} {{output}}",
        ))
        with pytest.raises(PluginFailure):
            converter.convert(registry.get(record.id), "bad")
        after = registry.get(record.id)
        assert registry.get_blob(after.weight_digest)  # source untouched
        assert [v.id for v in after.variants] == [good.id]

    def test_undecodable_source_fails_clean(self, converter, registry):
        record = registry.register(make_manifest(), b"not a toy model")
        with pytest.raises(PluginFailure):
            converter.convert(record, "toy-binary")
        assert registry.get(record.id).status == "failed"


class TestRunPlan:
    def test_all_targets_produced(self, converter, registry):
        record, _ = register_toy(registry)
        variants, failures = converter.run_plan(record)
        assert {v.format for v in variants} == {"toy-binary", "toy-json"}
        assert failures == {}
        assert registry.get(record.id).status == "converted"

    def test_partial_failure_still_converted(self, registry, plugins):
        plugins.register(ConverterPlugin(
            source_framework="toy", target_format="bad",
            kind="external-command",
            command_template=f"{sys.executable} -c \"import sys;sys.exit(1)\" {{input}} {{output}}",
        ))
        converter = Converter(registry, plugins)
        record, _ = register_toy(registry)
        variants, failures = converter.run_plan(record)
        assert {v.format for v in variants} == {"toy-binary", "toy-json"}
        assert set(failures) == {"bad"}
        assert registry.get(record.id).status == "converted"

    def test_total_failure_marks_failed(self, registry):
        plugins = PluginRegistry()
        plugins.register(ConverterPlugin(
            source_framework="toy", target_format="bad",
            kind="external-command",
            command_template=f"{sys.executable} -c \"import sys;sys.exit(1)\" {{input}} {{output}}",
        ))
        converter = Converter(registry, plugins)
        record, _ = register_toy(registry)
        variants, failures = converter.run_plan(record)
        assert variants == []
        assert set(failures) == {"bad"}
        assert registry.get(record.id).status == "failed"
