from .base import Backend, BackendError, BackendUnavailable, InvalidInput
from .http import HttpBackend, serve_backend
from .ngram import NGramBackend, NGramModel, ngram_train
from .scripted import ScriptedBackend

__all__ = [
    "Backend",
    "BackendError",
    "BackendUnavailable",
    "HttpBackend",
    "InvalidInput",
    "NGramBackend",
    "NGramModel",
    "ScriptedBackend",
    "ngram_train",
    "serve_backend",
]
