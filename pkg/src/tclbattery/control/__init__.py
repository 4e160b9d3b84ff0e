from .abc import Controller, DispatchCommand, DispatchResult, DispatchStatus, TclReport
from .priority import NullController, PriorityStackController, PriorityStacks, build_stacks, dispatch
