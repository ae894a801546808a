"""In-cabin voice command understanding.

Slot filling, intent-keyword extraction, and utterance-level intent
recognition for vehicle passenger commands, trained end to end on a
small reverse-mode autodiff engine. Includes a synthetic command-corpus
generator, a cross-validation harness, and a CLI for the full
generate / train / evaluate / predict / serve loop.
"""

__version__ = "0.1.0"
