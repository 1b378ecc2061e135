"""Acceptance gate: one test per release criterion, at the stated
tolerances and runtime budgets. Run with -v for one line per criterion.
"""

import dataclasses
import json
import math
import os
import time

import numpy as np
import pytest
import torch

from molmodal.chem.dataset import load_dataset
from molmodal.cli import main as cli_main
from molmodal.disentangle import LatentPair
from molmodal.featurize import collate, featurize_dataset, featurize_molecule, split_featurized
from molmodal.fusion import GateFusion, fuse
from molmodal.gradcheck import check_gradients, gradient_check
from molmodal.losses import (
    LossCoefficients,
    align_infonce,
    kl_shared,
    ortho_loss,
    recon_loss,
    task_loss,
)
from molmodal.model import ModelConfig, MultiModalModel
from molmodal.synth import make_disentangle_dataset, write_surrogate_regression_csv
from molmodal.training import RunConfig, evaluate, rmse, roc_auc, train, predict_dataset
from molmodal.ablation import run_ablation

from test_encoders import FIXTURE_SMILES, labeled, permute_record, rigid_motion_record
from molmodal.encoders import GeometryEncoder, GraphEncoder


@pytest.fixture(scope="module")
def regression_fds(tmp_path_factory):
    """The 1127-molecule regression set: real data if provided at
    data/esol.csv, otherwise the deterministic synthetic surrogate.
    """
    real = os.path.join(os.path.dirname(__file__), "..", "data", "esol.csv")
    if os.path.exists(real):
        path = real
    else:
        path = str(tmp_path_factory.mktemp("data") / "surrogate.csv")
        write_surrogate_regression_csv(path)
    ds = load_dataset(path, task_type="regression", smiles_column="smiles")
    return featurize_dataset(ds)


class TestCriterion1GradientSuite:
    """Analytic vs central-difference gradients, per term and end to end."""

    def test_per_term_and_full_model(self, tiny_model, tiny_batch):
        t0 = time.monotonic()
        g = torch.Generator().manual_seed(0)
        b, d = 4, 4
        mu = torch.randn(b, d, dtype=torch.float64, generator=g).requires_grad_(True)
        lv = (0.3 * torch.randn(b, d, dtype=torch.float64, generator=g)).requires_grad_(True)
        eps = torch.randn(b, d, dtype=torch.float64, generator=g)
        other = torch.randn(b, d, dtype=torch.float64, generator=g).requires_grad_(True)
        h = torch.randn(b, 8, dtype=torch.float64, generator=g)
        w = torch.randn(2 * d, 8, dtype=torch.float64, generator=g).requires_grad_(True)
        params = [("mu", mu), ("logvar", lv), ("other", other), ("w", w)]

        def lat():
            z = mu + torch.exp(0.5 * lv) * eps
            return LatentPair(
                mu_shared=mu, logvar_shared=lv, z_shared=z,
                mu_private=mu, logvar_private=lv, z_private=z, modality="graph",
            )

        terms = {
            "kl": lambda: kl_shared([lat()]),
            "align": lambda: align_infonce([lat().z_shared, other], temperature=0.1),
            "ortho": lambda: ortho_loss([lat()]),
            "recon": lambda: recon_loss(
                [h], [torch.cat([lat().z_shared, other], dim=-1) @ w]
            ),
            "label": lambda: task_loss(
                (lat().z_shared @ w[:d, :1]).squeeze(-1),
                torch.ones(b, dtype=torch.float64),
                torch.ones(b, dtype=torch.bool),
                "classification",
            ),
        }
        for name, fn in terms.items():
            report = check_gradients(fn, params, tolerance=1e-4, max_entries=8)
            assert report.passed, f"{name}:\n" + "\n".join(report.lines())

        for mode in ("LBL", "BOT", "ALL"):
            report = gradient_check(tiny_model, tiny_batch, mode=mode, max_entries=4)
            assert report.passed, f"{mode}:\n" + "\n".join(report.lines())
        assert time.monotonic() - t0 < 120.0


class TestCriterion2ClosedFormOracles:
    def test_exact_values(self):
        one = torch.ones(1, 1, dtype=torch.float64)
        zero = torch.zeros(1, 1, dtype=torch.float64)

        def pair(mu, lv, zs, zp):
            return LatentPair(
                mu_shared=mu, logvar_shared=lv, z_shared=zs,
                mu_private=mu, logvar_private=lv, z_private=zp, modality="graph",
            )

        assert kl_shared([pair(zero, zero, zero, zero)]).item() == pytest.approx(0.0, abs=1e-9)
        assert kl_shared([pair(one, zero, zero, zero)]).item() == pytest.approx(0.5, abs=1e-9)
        lv4 = math.log(4.0) * one
        assert kl_shared([pair(zero, lv4, zero, zero)]).item() == pytest.approx(
            0.5 * (4.0 - 1.0 - math.log(4.0)), abs=1e-9
        )  # 0.8069...

        e1 = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
        e2 = torch.tensor([[0.0, 1.0]], dtype=torch.float64)
        z = torch.zeros(1, 2, dtype=torch.float64)
        assert ortho_loss([pair(z, z, e1, e2)]).item() == pytest.approx(0.0, abs=1e-9)
        assert ortho_loss([pair(z, z, e1, 3.0 * e1)]).item() == pytest.approx(1.0, abs=1e-9)

        h = torch.randn(3, 4, dtype=torch.float64)
        d = torch.randn(3, 4, dtype=torch.float64)
        assert recon_loss([h], [h + 2 * d]).item() == pytest.approx(
            4.0 * recon_loss([h], [h + d]).item(), rel=1e-9
        )

        bce = task_loss(
            torch.zeros(1, dtype=torch.float64),
            torch.ones(1, dtype=torch.float64),
            torch.ones(1, dtype=torch.bool),
            "classification",
        )
        assert bce.item() == pytest.approx(math.log(2.0), abs=1e-9)

        same = torch.ones(5, 3, dtype=torch.float64)
        nce = align_infonce([same, same.clone()], temperature=0.1)
        assert nce.item() == pytest.approx(math.log(5.0), abs=1e-6)


class TestCriterion3GateSimplex:
    def test_thousand_draws_and_selection(self):
        torch.manual_seed(0)
        fusion = GateFusion(3, 4).double()
        g = torch.Generator().manual_seed(1)
        for _ in range(1000):
            shared = [torch.randn(2, 4, dtype=torch.float64, generator=g) for _ in range(3)]
            w = fusion.gate_weights(shared)
            assert (w >= -1e-6).all()
            assert (w.sum(dim=-1) - 1.0).abs().max() < 1e-6
        shared = [torch.randn(4, 4, dtype=torch.float64, generator=g) for _ in range(3)]
        for m in range(3):
            w = torch.zeros(4, 3, dtype=torch.float64)
            w[:, m] = 1.0
            assert torch.equal(fuse(w, shared), shared[m])


class TestCriterion4MaskedLabelIndependence:
    def test_hundred_trials_bit_identical(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            b, k, d = 5, 3, 4
            x = torch.tensor(rng.normal(size=(b, d)))
            w = torch.tensor(rng.normal(size=(d, k)), requires_grad=True)
            y = torch.tensor(rng.normal(size=(b, k)))
            mask = torch.tensor(rng.uniform(size=(b, k)) < 0.5)
            if not mask.any():
                mask[0, 0] = True
            task = "classification" if trial % 2 else "regression"
            if task == "classification":
                y = (y > 0).double()

            def run(labels):
                if w.grad is not None:
                    w.grad = None
                loss = task_loss(x @ w, labels, mask, task)
                loss.backward()
                return loss.item(), w.grad.clone()

            loss_a, grad_a = run(y)
            y2 = y.clone()
            y2[~mask] = torch.tensor(rng.normal(size=int((~mask).sum())))
            loss_b, grad_b = run(y2)
            assert loss_a == loss_b
            assert torch.equal(grad_a, grad_b)


class TestCriterion5EncoderInvariances:
    def test_graph_permutation_invariance(self):
        torch.manual_seed(0)
        enc = GraphEncoder(8).double()
        rng = np.random.default_rng(0)
        for smiles in FIXTURE_SMILES:
            rec = labeled(smiles)
            base = enc(collate([featurize_molecule(rec)], pad_id=50))
            for _ in range(5):  # 5 x 10 molecules = 50 permutations
                perm = rng.permutation(rec.molecule.graph.n_atoms)
                pb = collate([featurize_molecule(permute_record(rec, perm))], pad_id=50)
                assert (enc(pb) - base).abs().max() <= 1e-6

    def test_geometry_rigid_motion_invariance(self):
        torch.manual_seed(1)
        enc = GeometryEncoder(8).double()
        rng = np.random.default_rng(1)
        for smiles in FIXTURE_SMILES:
            rec = labeled(smiles)
            base = enc(collate([featurize_molecule(rec)], pad_id=50))
            for _ in range(5):  # 5 x 10 molecules = 50 rigid motions
                moved = rigid_motion_record(rec, rng)
                out = enc(collate([featurize_molecule(moved)], pad_id=50))
                assert (out - base).abs().max() <= 1e-6


class TestCriterion6MetricOracle:
    def test_auc_equals_bruteforce_on_200_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            n = int(rng.integers(4, 201))
            scores = rng.integers(0, 10, size=n) / 9.0  # coarse grid forces ties
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            pos = np.flatnonzero(labels == 1)
            neg = np.flatnonzero(labels == 0)
            gt = (scores[pos][:, None] > scores[neg][None, :]).sum()
            eq = (scores[pos][:, None] == scores[neg][None, :]).sum()
            expected = (gt + 0.5 * eq) / (len(pos) * len(neg))
            assert roc_auc(scores, labels) == expected


class TestCriterion7OverfitSanity:
    def test_train_rmse_below_015(self, regression_fds):
        t0 = time.monotonic()
        sub = dataclasses.replace(regression_fds, molecules=regression_fds.molecules[:32])
        cfg = RunConfig(
            task_type="regression", epochs=500, batch_size=64, hidden_dim=64,
            ablation_mode="ALL", seeds=(0,),
        )
        model, _ = train(cfg, sub, None, seed=0)
        y_hat, y, mask = predict_dataset(model, sub)
        assert rmse(y_hat, y, mask) < 0.15
        assert time.monotonic() - t0 < 300.0


class TestCriterion8DeskScaleRun:
    def test_beats_train_mean_baseline_every_seed(self, regression_fds):
        t0 = time.monotonic()
        assert len(regression_fds) == 1127
        cfg = RunConfig(
            task_type="regression", epochs=50, batch_size=64, hidden_dim=64,
            seeds=(0, 1, 2),
        )
        for seed in cfg.seeds:
            tr, va, te = split_featurized(regression_fds, cfg.split_ratios, seed)
            model, _ = train(cfg, tr, va, seed)
            test_rmse = evaluate(model, te)
            train_mean = float(np.mean([m.labels[0] for m in tr.molecules]))
            y_test = np.array([m.labels[0] for m in te.molecules])
            baseline = float(np.sqrt(((y_test - train_mean) ** 2).mean()))
            assert test_rmse < baseline, f"seed {seed}: {test_rmse:.3f} vs baseline {baseline:.3f}"
        assert time.monotonic() - t0 < 1800.0


class TestCriterion9AblationOrdering:
    def test_all_geq_bot_geq_lbl(self):
        t0 = time.monotonic()
        # each modality observes a corrupted shared factor (consensus is the
        # only reliable signal), labels are scarce, and the padding atoms are
        # modality-specific distractors: the regime where the unsupervised
        # regularizers carry real information
        fds = featurize_dataset(
            make_disentangle_dataset(
                n=1200, seed=0, coord_jitter=0.5, obs_noise=1.0,
                label_frac=0.15, pad_atoms=("C", "O", "S", "Cl"),
            )
        )
        cfg = RunConfig(
            task_type="classification", epochs=80, batch_size=64, hidden_dim=32,
            dropout=0.0, seeds=(0, 1, 2, 3, 4), split_ratios=(0.6, 0.2, 0.2),
        )
        report = run_ablation(cfg, fds)
        mean = {m: report["per_mode"][m]["mean"] for m in ("LBL", "BOT", "ALL")}
        assert mean["ALL"] >= mean["BOT"] >= mean["LBL"], mean
        n = len(cfg.seeds)
        var_all = report["per_mode"]["ALL"]["std"] ** 2
        var_lbl = report["per_mode"]["LBL"]["std"] ** 2
        pooled_se = math.sqrt((var_all + var_lbl) / n)
        assert mean["ALL"] - mean["LBL"] > pooled_se, (mean, pooled_se)
        assert time.monotonic() - t0 < 900.0


class TestCriterion10Reproducibility:
    def test_metrics_byte_identical_excluding_wall_time(self, tmp_path):
        csv = tmp_path / "sub.csv"
        write_surrogate_regression_csv(csv, n=40, seed=3)
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            rc = cli_main([
                "train", "--out", str(out), "--seeds", "0",
                "--set", f"dataset_path={csv}",
                "--set", "task_type=regression",
                "--set", "epochs=2",
                "--set", "batch_size=16",
                "--set", "hidden_dim=8",
                "--set", "d_shared=4",
                "--set", "d_private=4",
                "--set", "split_ratios=0.6,0.2,0.2",
            ])
            assert rc == 0
        streams = []
        for out in outs:
            lines = (out / "metrics_seed0.jsonl").read_text().splitlines()
            recs = []
            for line in lines:
                rec = json.loads(line)
                rec.pop("wall_time")
                recs.append(json.dumps(rec, sort_keys=True))
            streams.append(recs)
        assert streams[0] == streams[1]

    def test_coefficients_initialize_at_tenth(self):
        coeff = LossCoefficients()
        values = coeff.values().detach()
        assert (values - 0.1).abs().max() <= 1e-9
        torch.manual_seed(0)
        model = MultiModalModel(
            ModelConfig(vocab_size=10, n_tasks=1, task_type="regression", hidden_dim=8,
                        d_shared=4, d_private=4)
        )
        assert (model.coefficients.values().detach() - 0.1).abs().max() <= 1e-9
