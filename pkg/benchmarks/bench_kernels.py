"""Numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N] [--no-pipeline]

Kernel rows call both flavours directly on identical inputs.  The pipeline
row encodes a small synthetic scene in two subprocesses, one of them with
``G4C_DISABLE_JIT=1``, which is how users select the fallback.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from g4c import kernels
from g4c import rangecoder as rc
from g4c.render import look_at, project
from g4c.synth import SynthConfig, generate_synthetic_scene


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def coder_inputs(n=200_000, seed=0):
    rng = np.random.default_rng(seed)
    table = rc.FrequencyTable.from_probabilities(rng.dirichlet(np.full(256, 0.3)))
    s = rng.choice(256, size=n, p=table.probabilities)
    start, size = table.cum[s], table.counts[s]
    total = np.full(n, rc.TOTAL, dtype=np.int64)
    return table, s, start, size, total


def bench_encode(flavour, inputs):
    _, s, start, size, total = inputs
    enc = getattr(kernels, f"rc_encode_{flavour}")

    def run():
        buf = np.zeros(3 * s.size + 16, dtype=np.uint8)
        return enc(start, size, total, buf)

    return run


def bench_decode(flavour, inputs):
    table, s, start, size, total = inputs
    buf = np.zeros(3 * s.size + 16, dtype=np.uint8)
    data = buf[:kernels.rc_encode_nb(start, size, total, buf)].copy()
    dec = getattr(kernels, f"rc_decode_symbols_{flavour}")

    def run():
        out = np.empty(s.size, dtype=np.int64)
        return dec(data, table.cum, table.lookup, rc.TOTAL, s.size, out)

    return run


def bench_composite(flavour, splats):
    fn = getattr(kernels, f"composite_{flavour}")
    keep = np.ones(len(splats.opacity), dtype=np.bool_)

    def run():
        return fn(splats.means, splats.conics, splats.opacity, splats.colors(), splats.radii,
                  splats.order, keep, splats.width, splats.height, np.zeros(3))

    return run


PIPELINE = """
import time
from g4c.codec import encode_scene
from g4c.presets import level_preset
from g4c.synth import SynthConfig, generate_synthetic_scene
scene, probes = generate_synthetic_scene(SynthConfig(n_static=400, n_dynamic=100), seed=1)
preset = level_preset(3, prune_grid=16)
encode_scene(scene, preset, probes=probes)  # warm-up (JIT compile, probe cache)
scene, probes = generate_synthetic_scene(SynthConfig(n_static=400, n_dynamic=100), seed=2)
t = time.perf_counter()
encode_scene(scene, preset, probes=probes)
print(time.perf_counter() - t)
"""


def pipeline_time(disable_jit):
    env = dict(os.environ)
    env["G4C_DISABLE_JIT"] = "1" if disable_jit else "0"
    out = subprocess.run([sys.executable, "-c", PIPELINE], env=env, capture_output=True,
                         text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--no-pipeline", action="store_true")
    args = ap.parse_args(argv)

    inputs = coder_inputs()
    scene, _ = generate_synthetic_scene(SynthConfig(), seed=42, probes=False)
    splats = project(scene, look_at((2.2, 1.4, 1.2), width=128, height=128, time=10.0))
    cases = [("range encode 200k symbols", bench_encode, inputs),
             ("range decode 200k symbols", bench_decode, inputs),
             ("composite 2500 splats 128x128", bench_composite, splats)]

    print(f"{'case':<32}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for name, make, arg in cases:
        make("nb", arg)()  # compile outside the timed region
        t_nb = best_of(make("nb", arg), args.repeat)
        t_py = best_of(make("py", arg), args.repeat)
        print(f"{name:<32}{t_nb:>10.4f}{t_py:>10.4f}{t_py / t_nb:>8.1f}x")
    if not args.no_pipeline:
        t_nb, t_py = pipeline_time(False), pipeline_time(True)
        print(f"{'encode_scene level 3 (500 G)':<32}{t_nb:>10.4f}{t_py:>10.4f}"
              f"{t_py / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
