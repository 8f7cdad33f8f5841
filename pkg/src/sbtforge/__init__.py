"""Semantic-web agents driven by SPARQL behavior trees.

The package bundles an in-memory RDF store with a SPARQL subset engine,
a behavior-tree runtime whose leaves evaluate SPARQL against an agent
knowledge base, a BDI-style agent runtime with Linked-Data endpoints,
and a natural-language pipeline (instruction -> behavior tree,
question -> SPARQL, documentation question -> retrieved answer) backed
by a pluggable language-model provider.
"""

__version__ = "0.1.0"
