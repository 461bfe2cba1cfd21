"""Failure explanation for robot task logs.

Pipeline: log bundle -> aggregated semantic point clouds -> task-informed
scene graphs -> key-frame captions and subgoal summary -> progressive
failure explanation -> correction plan grounded to executable actions.
"""

__version__ = "0.1.0"
