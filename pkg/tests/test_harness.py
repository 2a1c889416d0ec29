import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lowmem_experts.cli import main
from lowmem_experts.core import ConfigError, GameConfig, MemoryMeter, RandomnessSource
from lowmem_experts.harness import (CSV_COLUMNS, ActionHistory, default_epoch_length, make_adversary,
                                    make_learner, play, resolve_groups, run_game, run_suite, validate)
from lowmem_experts.adversaries import LossStream
from tests.golden_configs import GOLDEN

GOLDEN_DIR = Path(__file__).parent / "golden"


class Expert0:
    def act(self):
        return 0

    def observe(self, losses):
        pass

    def memory_words(self):
        return 3


class Zeros(LossStream):
    def reveal(self, day, history, p=None):
        return np.zeros(self.n)


class Recorder(LossStream):
    kind = "adaptive"

    def __init__(self, n):
        super().__init__(n, None)
        self.seen = []

    def reveal(self, day, history, p=None):
        self.seen.append(list(history))
        return np.zeros(self.n)


def test_trivial_learner_zero_stream():
    meter = MemoryMeter()
    actions, alg, best, regret, mem = play(Expert0(), Zeros(4, None), 4, 50, meter)
    assert regret[-1] == 0 and set(mem) == {3}
    assert meter.balanced


def test_adversary_sees_only_past_actions():
    rec = Recorder(3)
    play(Expert0(), rec, 3, 5)
    assert rec.seen == [[0] * d for d in range(5)]


def test_history_view_read_only():
    h = ActionHistory([1, 2])
    assert list(h) == [1, 2] and h[-1] == 2
    with pytest.raises(TypeError):
        h[0] = 5


def test_mwu_planted_gap_regret():
    T, n = 2048, 8
    ok = sum(run_game(GameConfig(n=n, T=T, algo="mwu", adversary="planted", seed=s)).final_regret
             <= 3 * math.sqrt(T * math.log(n)) for s in range(20))
    assert ok >= 18


def test_replay_identical_bytes():
    cfg = GameConfig(n=16, T=256, algo="oblivious-full", adversary="two-phase", seed=11)
    assert run_game(cfg).to_csv() == run_game(cfg).to_csv()


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_csv(name):
    assert run_game(GOLDEN[name]).to_csv() == (GOLDEN_DIR / f"{name}.csv").read_text()


def test_csv_columns_and_stride():
    tr = run_game(GameConfig(n=4, T=10, algo="mwu", seed=0))
    lines = tr.to_csv(stride=4).splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert [int(l.split(",")[0]) for l in lines[1:]] == [4, 8, 10]


def test_regret_column_matches_losses():
    tr = run_game(GameConfig(n=6, T=200, algo="squint-hedge", adversary="iid", seed=3))
    assert np.allclose(np.cumsum(tr.alg_loss) - tr.best_cum, tr.regret)


def test_run_suite_single_config():
    cfg = GameConfig(n=8, T=64, algo="mwu", seed=2)
    row, = run_suite([cfg])
    tr = run_game(cfg)
    assert row["median_regret"] == tr.final_regret
    assert row["median_peak_words"] == tr.peak_memory


def test_run_suite_stable():
    cfgs = [GameConfig(n=8, T=64, algo="baseline", adversary="planted", seed=s) for s in range(5)]
    assert run_suite(cfgs) == run_suite(cfgs)


def test_grouped_oblivious_regret_decreases_with_budget():
    # more space -> more groups; median regret over seeds on the two-phase stream
    meds = []
    for G in (1, 4):
        regs = [run_game(GameConfig(n=32, T=2048, algo="grouped-oblivious", adversary="two-phase",
                                    groups=G, seed=s)).final_regret for s in range(6)]
        meds.append(np.median(regs))
    assert meds[1] <= meds[0]


def test_default_epoch_length_divides():
    for n, T in [(32, 8192), (7, 1000), (1, 1)]:
        B = default_epoch_length(n, T)
        assert T % B == 0 and B <= max(1, (T / n) ** (2 / 3))


def test_resolve_groups():
    assert resolve_groups(GameConfig(n=64, T=256, algo="grouped-oblivious", groups=4)) == 4
    assert resolve_groups(GameConfig(n=64, T=256, algo="grouped-oblivious", space_budget=10**4)) == 32
    assert resolve_groups(GameConfig(n=64, T=256, algo="grouped-adaptive", space_budget=512, epsilon=0.25)) == 2


def test_validate_rejects_bad_groups_and_missing_eps():
    with pytest.raises(ConfigError):
        validate(GameConfig(n=64, T=256, algo="grouped-oblivious", groups=3))
    with pytest.raises(ConfigError):
        validate(GameConfig(n=64, T=256, adversary="disjointness"))


def test_strong_adversary_gets_distribution():
    # MWU starts uniform, so the first day's losses hit the 2S lowest-id special experts
    cfg = GameConfig(n=40, T=1, algo="mwu", adversary="strong", space_budget=2, seed=0)
    source_adv = make_adversary(cfg, RandomnessSource(0))
    tr = run_game(cfg)
    special = source_adv.special
    a = int(tr.actions[0])
    expected = 0.0 if a in special[4:] else 1.0
    assert tr.alg_loss[0] == expected
    assert run_game(GameConfig(n=32, T=64, algo="oblivious-full", adversary="strong",
                               space_budget=2, seed=0)).T == 64


def test_cli_writes_csv(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["--algo", "mwu", "--n", "4", "--T", "16", "--seed", "3", "--out", str(out)]) == 0
    assert out.read_text() == run_game(GameConfig(n=4, T=16, algo="mwu", seed=3)).to_csv()


def test_cli_multi_seed(tmp_path, capsys):
    assert main(["--algo", "baseline", "--n", "8", "--T", "64", "--seeds", "3", "--out", str(tmp_path)]) == 0
    rows = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert rows[0]["seeds"] == [0, 1, 2]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["seed0.csv", "seed1.csv", "seed2.csv"]


def test_cli_constants_and_adversary_params(capsys):
    assert main(["--algo", "baseline", "--adversary", "planted", "--n", "8", "--T", "64",
                 "--constants", "B=8", "p_sample=0.5", "adv.gap=0.3", "--trace-stride", "64"]) == 0
    assert capsys.readouterr().out.count("\n") == 2


@pytest.mark.parametrize("argv", [
    ["--algo", "oblivious-full", "--n", "6", "--T", "64"],
    ["--algo", "adaptive", "--epsilon", "0.3", "--T", "64"],
    ["--constants", "oops"],
    ["--trace-stride", "0"],
])
def test_cli_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "config error" in capsys.readouterr().err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "lowmem_experts", "--n", "2", "--T", "4"],
                       capture_output=True, text=True, check=True)
    assert r.stdout.splitlines()[0] == ",".join(CSV_COLUMNS)
