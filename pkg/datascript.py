import numpy as np

from tclbattery.signal import RegulationSignal, synthetic_signal, write_signal


def clipped_sine(duration, period, amplitude):
    times = np.arange(0.0, duration + 2.0, 2.0)
    values = np.clip(amplitude * np.sin(2 * np.pi * times / period), -1.0, 1.0)
    return RegulationSignal(times, values, source=f"clipped sine, period {period:g} s")


def signal_input():
    title = "Regulation Signal Script"
    print(title + "\n" + "-" * len(title))

    duration = float(input("Duration in seconds (default 10020): ") or 10020)
    match input("Shape, 'synthetic' or 'sine' (default synthetic): ") or "synthetic":
        case "synthetic":
            seed = int(input("Seed (default 0): ") or 0)
            return synthetic_signal(duration, seed=seed)
        case "sine":
            period = float(input("Period in seconds (default 3600): ") or 3600)
            amplitude = float(input("Amplitude before clipping (default 1.5): ") or 1.5)
            return clipped_sine(duration, period, amplitude)
        case other:
            raise SystemExit(f"Unknown shape {other!r}.")


if __name__ == "__main__":
    signal = signal_input()
    path = input("Output file (default signal.csv): ") or "signal.csv"
    write_signal(signal, path)
    print(f"Wrote {len(signal.times)} samples to {path}.")
