"""Deterministic simulator for coordinated checkpointing and rollback recovery.

The package is organised in layers:

* ``core``      counter bookkeeping and immutable value types
* ``trace``     the flat event trace every run produces
* ``protocol``  the per-process checkpoint state machine
* ``recovery``  dependency analysis and rollback-set computation
* ``tmr``       triple-modular-redundant checkpoint placement and failover
* ``simnet``    the discrete-event network simulator tying it together
* ``oracle``    trace-level consistency and minimality checks
* ``scenario``  scenario file format, presets and fuzz generation
* ``runner``    one-shot execution with oracle verdicts and reports
* ``service``   HTTP facade (FastAPI); ``cli`` is a thin client for it
"""

__version__ = "0.1.0"
