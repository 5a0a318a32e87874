"""Topic evolution analytics over document embeddings and citation graphs."""

__version__ = "0.1.0"
