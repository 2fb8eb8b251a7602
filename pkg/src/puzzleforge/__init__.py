"""Chess puzzle foundry: generate, score, label, curate, export."""

__version__ = "0.1.0"
