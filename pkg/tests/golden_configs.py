"""Pinned (config, seed) pairs whose CSV traces are stored under tests/golden/."""

from lowmem_experts.core import GameConfig

GOLDEN = {
    "mwu_iid_n8_T128_s1": GameConfig(n=8, T=128, algo="mwu", adversary="iid", seed=1),
    "squint_planted_n8_T128_s2": GameConfig(n=8, T=128, algo="squint-hedge", adversary="planted", seed=2),
    "baseline_planted_n16_T512_s2": GameConfig(n=16, T=512, algo="baseline", adversary="planted", seed=2),
    "oblivious_twophase_n8_T256_s7": GameConfig(n=8, T=256, algo="oblivious-full", adversary="two-phase", seed=7),
    "grouped_oblivious_n16_T256_s4": GameConfig(n=16, T=256, algo="grouped-oblivious", adversary="two-phase",
                                                groups=2, seed=4),
    "adaptive_disjointness_n144_T256_s3": GameConfig(n=144, T=256, algo="adaptive", adversary="disjointness",
                                                     epsilon=0.25, seed=3),
    "strong_mwu_n40_T64_s5": GameConfig(n=40, T=64, algo="mwu", adversary="strong", space_budget=2, seed=5),
}


def regenerate(directory):
    from lowmem_experts.harness import run_game
    for name, cfg in GOLDEN.items():
        (directory / f"{name}.csv").write_text(run_game(cfg).to_csv())


if __name__ == "__main__":
    from pathlib import Path
    regenerate(Path(__file__).parent / "golden")
