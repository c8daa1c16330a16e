"""qfix: diagnose and repair erroneous constants in update-query logs.

Given an initial state D_0, a log of UPDATE/INSERT/DELETE queries, and a set
of complaints about the final state, qfix searches for the minimal
constants-only change to the log whose replay resolves every complaint, by
encoding the log's data provenance as a mixed-integer linear program and
solving it with the built-in exact solver.
"""

__version__ = "0.1.0"
