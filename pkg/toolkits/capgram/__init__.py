"""Capacity-bounded grammars and Petri-net-controlled grammars toolkit."""
