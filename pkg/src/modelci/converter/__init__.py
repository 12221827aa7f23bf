from modelci.converter.converter import Converter
from modelci.converter.plugins import ConverterPlugin, ConversionPlan, PluginRegistry

__all__ = ["Converter", "ConverterPlugin", "ConversionPlan", "PluginRegistry"]
