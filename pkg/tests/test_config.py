import tempfile
from pathlib import Path
from unittest import TestCase

from tclbattery.config import PRESETS, default_config, parse_config, parse_config_text
from tclbattery.errors import ConfigError
from tclbattery.fleet import InitMode


class Defaults(TestCase):
    def test_empty_text(self):
        config, spec, settings = parse_config_text("")
        self.assertEqual(spec.base_params, PRESETS["table-1-physical"])
        self.assertEqual(spec.count, 1000)
        self.assertEqual(spec.heterogeneity, 0.3)
        self.assertEqual(config.step_seconds, 10.02)
        self.assertEqual(config.horizon_steps, 1000)
        self.assertEqual(config.ambient_at(0), 32.0)
        self.assertTrue(config.soc_gate_enabled)
        self.assertTrue(config.strict_eq8)
        self.assertEqual(settings.scale_fraction, 0.5)
        self.assertIsNone(settings.path)

    def test_default_config(self):
        self.assertEqual(default_config(), parse_config_text(""))

    def test_comments_and_blank_lines(self):
        config, spec, _ = parse_config_text("# a fleet\n\ncount = 20  # small\n   \n")
        self.assertEqual(spec.count, 20)

    def test_published_preset(self):
        _, spec, _ = parse_config_text("preset = table-1")
        self.assertEqual(spec.base_params.cop, 0.3)

    def test_template_overrides(self):
        _, spec, _ = parse_config_text("preset = table-1\ncop = 3.0\ndeadband = 1.5")
        self.assertEqual(spec.base_params.cop, 3.0)
        self.assertEqual(spec.base_params.deadband_halfwidth, 1.5)
        self.assertEqual(spec.base_params.rated_power, 5.6)


class Values(TestCase):
    def test_accepted(self):
        config, spec, settings = parse_config_text(
            "heterogeneity = 0.3\n"
            "seed = 12\n"
            "init_mode = uniform-in-band\n"
            "soc_gate_enabled = false\n"
            "strict_eq8 = no\n"
            "lockout_seconds = 20.04\n"
            "workers = 4\n"
            "scale_fraction = 1.2\n")
        self.assertEqual(spec.heterogeneity, 0.3)
        self.assertEqual(spec.init_mode, InitMode.UNIFORM)
        self.assertFalse(config.soc_gate_enabled)
        self.assertFalse(config.strict_eq8)
        self.assertEqual(config.lockout_steps, 2)
        self.assertEqual(config.workers, 4)
        self.assertEqual(settings.scale_fraction, 1.2)

    def test_documented_names(self):
        config, spec, _ = parse_config_text("strict_eq8 = false\ninit_mode = uniform-in-band")
        self.assertFalse(config.strict_eq8)
        self.assertIs(spec.init_mode, InitMode.UNIFORM)
        self.assertEqual(InitMode("uniform-in-band"), InitMode.UNIFORM)
        for text, key in (("strict_ramp_down = false", "strict_ramp_down"),
                          ("init_mode = uniform", "init_mode")):
            with self.subTest(text=text):
                with self.assertRaises(ConfigError) as caught:
                    parse_config_text(text)
                self.assertEqual(caught.exception.key, key)

    def test_seeds(self):
        config, spec, settings = parse_config_text("seed = 12")
        self.assertEqual((config.seed, spec.seed, settings.seed), (12, 12, 12))
        _, _, settings = parse_config_text("seed = 12\nsignal_seed = 5")
        self.assertEqual(settings.seed, 5)

    def test_rejected(self):
        for text, key in (("heterogeneity = 1.5", "heterogeneity"),
                          ("heterogeneity = high", "heterogeneity"),
                          ("count = 0", "count"),
                          ("count = 2.5", "count"),
                          ("seed = -1", "seed"),
                          ("preset = table-2", "preset"),
                          ("init_mode = random", "init_mode"),
                          ("soc_gate_enabled = maybe", "soc_gate_enabled"),
                          ("step_seconds = 0", "step_seconds"),
                          ("colour = blue", "colour")):
            with self.subTest(text=text):
                with self.assertRaises(ConfigError) as caught:
                    parse_config_text(text)
                self.assertEqual(caught.exception.key, key)
                self.assertIn(key, str(caught.exception))

    def test_duplicate_key(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config_text("count = 10\ncount = 20")
        self.assertEqual(caught.exception.key, "count")
        self.assertIn("line 2", str(caught.exception))

    def test_malformed_line(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config_text("count 10")
        self.assertIn("line 1", str(caught.exception))


class Files(TestCase):
    def test_relative_signal_path(self):
        _, _, settings = parse_config_text("signal_path = signals/r.csv", base_dir=Path("/data"))
        self.assertEqual(settings.path, Path("/data/signals/r.csv"))

    def test_ambient_conflict(self):
        with self.assertRaises(ConfigError) as caught:
            parse_config_text("ambient_temp = 30\nambient_profile = ambient.csv")
        self.assertEqual(caught.exception.key, "ambient_profile")

    def test_parse_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            Path(tmp, "ambient.csv").write_text("t,temp\n0,30.0\n50,31.0\n100,32.0\n")
            path = Path(tmp, "run.cfg")
            path.write_text("count = 5\nstep_seconds = 10\nhorizon_steps = 11\n"
                            "ambient_profile = ambient.csv\nsignal_path = r.csv\n")
            config, spec, settings = parse_config(path)
        self.assertEqual(spec.count, 5)
        self.assertEqual(config.ambient_profile, (30.0,) * 5 + (31.0,) * 5 + (32.0,))
        self.assertEqual(spec.ambient_temp, 30.0)
        self.assertEqual(settings.path, Path(tmp, "r.csv"))

    def test_short_ambient_profile(self):
        with tempfile.TemporaryDirectory() as tmp:
            Path(tmp, "ambient.csv").write_text("0,30.0\n50,31.0\n")
            path = Path(tmp, "run.cfg")
            path.write_text("horizon_steps = 100\nambient_profile = ambient.csv\n")
            with self.assertRaises(ConfigError) as caught:
                parse_config(path)
        self.assertEqual(caught.exception.key, "ambient_profile")

    def test_missing_file(self):
        with self.assertRaises(OSError):
            parse_config(Path(tempfile.gettempdir(), "no-such-dir", "run.cfg"))
