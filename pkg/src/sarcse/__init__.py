"""Contrastive sentence embeddings with a convolutional autoencoder and
frequency-weighted token reconstruction, self-contained on numpy."""

__version__ = "0.1.0"
