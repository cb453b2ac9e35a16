"""Emptiness checking for timed automata and timed pushdown automata via tree automata."""

__version__ = "0.1.0"
