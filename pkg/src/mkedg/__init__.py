"""MK-EDG: multi-type-knowledge empathetic dialogue generation.

A desk-scale, fully testable pipeline: commonsense tuples and a
valence/arousal/dominance lexicon enrich dialogue histories into
emotional context graphs, a graph-aware transformer encoder distills an
emotion signal, and a cross-attentive decoder with a copy mechanism
generates the response.  Includes training, evaluation, a CLI, and an
HTTP inference service.
"""

__version__ = "0.1.0"
