"""Conversion pipeline: registered model -> deployable variants."""

from __future__ import annotations

import logging
import threading
from collections import defaultdict

from modelci.converter.plugins import ConversionPlan, ConversionStep, PluginRegistry
from modelci.errors import ModelCIError, UnsupportedConversion
from modelci.registry.registry import ModelRegistry
from modelci.registry.types import ModelRecord, ModelVariant, new_id

logger = logging.getLogger(__name__)


class Converter:
    """Fans a registered model out to variants via the plugin registry.

    Conversions for distinct records may run in parallel; a per-record lock
    keeps it to one conversion at a time per record.
    """

    def __init__(self, registry: ModelRegistry, plugins: PluginRegistry):
        self.registry = registry
        self.plugins = plugins
        self._record_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def _lock_for(self, record_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._record_locks[record_id]

    def plan(self, record: ModelRecord, targets: list[str] | None = None) -> ConversionPlan:
        """One step per requested target; empty targets means every plugin
        registered for the record's framework (auto-conversion)."""
        if targets:
            steps = [ConversionStep(self.plugins.lookup(record.framework, t), t)
                     for t in targets]
        else:
            steps = [ConversionStep(p, p.target_format)
                     for p in self.plugins.for_source(record.framework)]
            if not steps:
                raise UnsupportedConversion(
                    f"no plugins registered for framework '{record.framework}'"
                )
        return ConversionPlan(record_id=record.id, steps=steps)

    def convert(self, record: ModelRecord, target_format: str) -> ModelVariant:
        """Single-target conversion, advancing the record's lifecycle."""
        with self._lock_for(record.id):
            plugin = self.plugins.lookup(record.framework, target_format)
            self.registry.advance_status(record.id, "converting")
            try:
                variant = self._convert_one(record, plugin, target_format)
            except ModelCIError:
                self.registry.advance_status(record.id, "failed")
                raise
            self.registry.advance_status(record.id, "converted")
            return variant

    def run_plan(self, record: ModelRecord,
                 targets: list[str] | None = None) -> tuple[list[ModelVariant], dict[str, str]]:
        """Auto-conversion: run every step, collecting failures per target.

        The record ends converted when at least one variant was produced,
        failed when none were.
        """
        plan = self.plan(record, targets)
        with self._lock_for(record.id):
            self.registry.advance_status(record.id, "converting")
            variants: list[ModelVariant] = []
            failures: dict[str, str] = {}
            for step in plan.steps:
                try:
                    variants.append(self._convert_one(record, step.plugin, step.target_format))
                except ModelCIError as exc:
                    logger.warning("conversion of %s to %s failed: %s",
                                   record.id, step.target_format, exc)
                    failures[step.target_format] = str(exc)
            self.registry.advance_status(record.id, "converted" if variants else "failed")
            return variants, failures

    def _convert_one(self, record: ModelRecord, plugin, target_format: str) -> ModelVariant:
        source = self.registry.get_blob(record.weight_digest)
        output = plugin.run(source)
        digest = self.registry.put_blob(output)
        variant = ModelVariant(
            id=new_id(),
            parent_id=record.id,
            format=target_format,
            blob_digest=digest,
            serving_backends=list(plugin.produces_backends),
        )
        self.registry.append_variant(record.id, variant)
        logger.info("converted %s to %s (digest %s)", record.id, target_format, digest[:12])
        return variant
