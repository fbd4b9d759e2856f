"""AI-generated-text detection with a ZigZag ResNet over sentence-embedding images."""

__version__ = "0.1.0"
