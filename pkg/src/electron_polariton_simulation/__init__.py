"""Free-electron probing of a nanocavity-emitter polariton target."""

__version__ = "0.1"
