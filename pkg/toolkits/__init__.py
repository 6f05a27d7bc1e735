"""Formal language toolkits package.

This package hosts self-contained toolkits such as:
- capgram (capacity-bounded grammars, regulated grammars, Petri net control)
"""
