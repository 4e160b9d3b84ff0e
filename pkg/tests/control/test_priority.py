from typing import get_type_hints
from unittest import TestCase

from hypothesis import given, settings, strategies as st

from tclbattery.battery import DynamicLimits, SocSample
from tclbattery.control import (Controller, DispatchCommand, DispatchResult, DispatchStatus,
                                NullController, PriorityStackController, PriorityStacks, TclReport,
                                build_stacks, dispatch)
from tclbattery.errors import ProtocolError

WIDE = DynamicLimits(capacity=100.0, ramp_up=1000.0, ramp_down=1000.0)
EMPTY = PriorityStacks((), ())


def off_stack(*distances, power=5.0):
    return PriorityStacks((), tuple(TclReport(i, False, True, d, power)
                                    for i, d in enumerate(distances)))


class Stacks(TestCase):
    def test_merit_order(self):
        reports = [TclReport(0, True, True, 0.8, 5.0),
                   TclReport(1, True, True, 0.2, 5.0),
                   TclReport(2, False, True, 1.5, 5.0),
                   TclReport(3, False, True, 0.1, 5.0),
                   TclReport(4, True, True, 0.2, 5.0)]
        stacks = build_stacks(reports)
        self.assertEqual([r.id for r in stacks.on_stack], [1, 4, 0])
        self.assertEqual([r.id for r in stacks.off_stack], [3, 2])

    def test_unavailable_left_out(self):
        stacks = build_stacks([TclReport(0, True, False, 0.1, 5.0),
                               TclReport(1, False, False, 0.1, 5.0)])
        self.assertEqual(stacks, EMPTY)

    def test_duplicate_report(self):
        with self.assertRaises(ProtocolError):
            build_stacks([TclReport(0, True, True, 0.1, 5.0), TclReport(0, True, True, 0.1, 5.0)])

    def test_mixed_ticks(self):
        with self.assertRaises(ProtocolError):
            build_stacks([TclReport(0, True, True, 0.1, 5.0, tick=1),
                          TclReport(1, True, True, 0.1, 5.0, tick=2)])


class Dispatch(TestCase):
    def test_switch_on_until_no_gain(self):
        # 12 -> 7 -> 2; a third unit would leave -3
        result = dispatch(12.0, 0.0, off_stack(0.1, 0.2, 0.3, 0.4), WIDE, SocSample(0.0))
        self.assertEqual(result.commands, (DispatchCommand(0, True), DispatchCommand(1, True)))
        self.assertEqual(result.status, DispatchStatus.TRACKED)
        self.assertAlmostEqual(result.residual, 2.0)

    def test_overshoot_when_closer(self):
        # 13 -> 8 -> 3 -> -2
        result = dispatch(13.0, 0.0, off_stack(0.1, 0.2, 0.3, 0.4), WIDE, SocSample(0.0))
        self.assertEqual(len(result.commands), 3)
        self.assertAlmostEqual(result.residual, -2.0)

    def test_switch_off(self):
        on_stack = tuple(TclReport(i, True, True, 0.1 * i, 4.0) for i in range(5))
        result = dispatch(-10.0, 0.0, PriorityStacks(on_stack, ()), WIDE, SocSample(0.0))
        self.assertEqual([c.forced_state for c in result.commands], [False, False])
        self.assertEqual([c.id for c in result.commands], [0, 1])
        self.assertAlmostEqual(result.residual, -2.0)

    def test_uses_deviation(self):
        result = dispatch(12.0, 10.0, off_stack(0.1, 0.2), WIDE, SocSample(0.0))
        self.assertEqual(result.commands, ())
        self.assertAlmostEqual(result.residual, 2.0)

    def test_nothing_to_do(self):
        result = dispatch(3.0, 3.0, off_stack(0.1), WIDE, SocSample(0.0))
        self.assertEqual(result.commands, ())
        self.assertEqual(result.residual, 0.0)
        self.assertTrue(result.status)

    def test_stack_exhausted(self):
        result = dispatch(100.0, 0.0, off_stack(0.1, 0.2), WIDE, SocSample(0.0))
        self.assertEqual(len(result.commands), 2)
        self.assertAlmostEqual(result.residual, 90.0)
        self.assertEqual(result.status, DispatchStatus.TRACKED)

    def test_empty_stacks(self):
        result = dispatch(-7.0, 0.0, EMPTY, WIDE, SocSample(0.0))
        self.assertEqual(result.commands, ())
        self.assertEqual(result.residual, -7.0)


class Feasibility(TestCase):
    def test_ramp(self):
        limits = DynamicLimits(capacity=100.0, ramp_up=10.0, ramp_down=5.0, step_index=3)
        for r in (10.5, -5.5):
            with self.subTest(r=r):
                result = dispatch(r, 0.0, off_stack(0.1, 0.2), limits, SocSample(0.0))
                self.assertEqual(result.status, DispatchStatus.INFEASIBLE_RAMP)
                self.assertEqual(result.commands, ())
                self.assertEqual(result.residual, r)
                self.assertFalse(result.status)

    def test_soc_gate(self):
        limits = DynamicLimits(capacity=1.0, ramp_up=100.0, ramp_down=100.0)
        result = dispatch(8.0, 0.0, off_stack(0.1), limits, SocSample(1.5))
        self.assertEqual(result.status, DispatchStatus.INFEASIBLE_SOC)
        self.assertEqual(result.commands, ())

        ungated = dispatch(8.0, 0.0, off_stack(0.1), limits, SocSample(1.5), soc_gate=False)
        self.assertEqual(ungated.status, DispatchStatus.TRACKED)
        self.assertEqual(len(ungated.commands), 1)

    def test_ramp_checked_first(self):
        limits = DynamicLimits(capacity=1.0, ramp_up=1.0, ramp_down=1.0)
        result = dispatch(8.0, 0.0, EMPTY, limits, SocSample(5.0))
        self.assertEqual(result.status, DispatchStatus.INFEASIBLE_RAMP)


class Controllers(TestCase):
    def test_priority_stack_controller(self):
        limits = DynamicLimits(capacity=1.0, ramp_up=100.0, ramp_down=100.0)
        stacks, soc = off_stack(0.1), SocSample(1.5)
        self.assertEqual(PriorityStackController().dispatch(8.0, 0.0, stacks, limits, soc).status,
                         DispatchStatus.INFEASIBLE_SOC)
        self.assertEqual(PriorityStackController(soc_gate=False)
                         .dispatch(8.0, 0.0, stacks, limits, soc).status,
                         DispatchStatus.TRACKED)

    def test_null_controller(self):
        result = NullController().dispatch(8.0, 3.0, off_stack(0.1), WIDE, SocSample(0.0))
        self.assertEqual(result.status, DispatchStatus.UNCONTROLLED)
        self.assertEqual(result.commands, ())
        self.assertEqual(result.residual, 5.0)
        self.assertFalse(result.status)

    def test_repr(self):
        self.assertEqual(repr(PriorityStackController(soc_gate=False)),
                         "PriorityStackController(soc_gate=False)")

    def test_dispatch_signature(self):
        expected = {"r": float, "psi": float, "stacks": PriorityStacks, "limits": DynamicLimits,
                    "soc": SocSample, "return": DispatchResult}
        for controller in (Controller, PriorityStackController, NullController):
            with self.subTest(controller=controller.__name__):
                hints = get_type_hints(controller.dispatch,
                                       localns={"PriorityStacks": PriorityStacks})
                self.assertEqual(hints, expected)


class DispatchProperties(TestCase):
    @settings(max_examples=200)
    @given(st.floats(-200.0, 200.0), st.lists(st.floats(0.0, 2.0), max_size=60),
           st.floats(1.0, 8.0))
    def test_granularity(self, xi, distances, power):
        """Unless the stack runs out, what is left is at most half a unit."""
        on_stack = tuple(TclReport(i, True, True, d, power) for i, d in enumerate(sorted(distances)))
        off = tuple(TclReport(i, False, True, d, power) for i, d in enumerate(sorted(distances)))
        result = dispatch(xi, 0.0, PriorityStacks(on_stack, off), WIDE, SocSample(0.0))
        if len(result.commands) < len(distances):
            self.assertLessEqual(abs(result.residual), power / 2 + 1e-9)
        self.assertLessEqual(abs(result.residual), abs(xi))

    @given(st.floats(-50.0, 50.0), st.lists(st.floats(1.0, 8.0), min_size=1, max_size=30))
    def test_merit_prefix(self, xi, powers):
        """Commanded units are always a prefix of the stack."""
        stack = tuple(TclReport(i, xi < 0, True, 0.01 * i, p) for i, p in enumerate(powers))
        stacks = PriorityStacks(stack, ()) if xi < 0 else PriorityStacks((), stack)
        result = dispatch(xi, 0.0, stacks, WIDE, SocSample(0.0))
        self.assertEqual([c.id for c in result.commands], list(range(len(result.commands))))
        self.assertTrue(all(c.forced_state == (xi > 0) for c in result.commands))
