"""Regenerate the golden containers and their expected digests.

Run from the repository root: ``python tests/data/make_golden.py``.  Only do
this after an intentional format change; the fixtures exist to catch
unintentional ones.
"""
import hashlib
import json
import os

import numpy as np

from g4c.codec import decode_scene, encode_scene
from g4c.model import scene_digest
from g4c.presets import LevelPreset, level_preset
from g4c.quant import PruneMask, ShMask
from g4c.synth import SynthConfig, generate_synthetic_scene, random_scene

HERE = os.path.dirname(os.path.abspath(__file__))
TINY = SynthConfig(n_static=160, n_dynamic=40, n_frames=16, n_views=2, n_times=2,
                   image_size=32)


def fixtures():
    scene, probes = generate_synthetic_scene(TINY, seed=5)
    yield "tiny_level3", scene, level_preset(3, prune_grid=16, ecvq_iters=8), probes, None

    rng = np.random.default_rng(11)
    scene = random_scene(rng, max_static=30, max_dynamic=12, sh_degree=2)
    gs = PruneMask.from_hard(rng.random(scene.n_gaussians) < 0.8)
    sh = ShMask.from_hard(rng.random((scene.n_gaussians, 2)) < 0.6)
    yield "random_masked", scene, LevelPreset(wavelet_levels=2), None, (gs, sh)

    scene, _ = generate_synthetic_scene(SynthConfig(n_static=80, n_dynamic=0, n_frames=8),
                                        seed=9, probes=False)
    yield "static_only", scene, LevelPreset(wavelet_levels=0, codebook_size=16), None, None


def main():
    manifest = {}
    for name, scene, preset, probes, masks in fixtures():
        container, _ = encode_scene(scene, preset, seed=1, probes=probes, masks=masks)
        path = os.path.join(HERE, f"{name}.g4c")
        container.write(path)
        manifest[f"{name}.g4c"] = {"decoded_digest": scene_digest(decode_scene(container)),
                                   "sha256": hashlib.sha256(container.data).hexdigest(),
                                   "size": container.size}
    with open(os.path.join(HERE, "golden.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
