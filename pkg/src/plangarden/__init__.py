"""plangarden: grow an editable plan-and-action graph from one seed prompt."""

__version__ = "0.1.0"
