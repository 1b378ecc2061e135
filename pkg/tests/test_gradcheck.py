import torch

from molmodal.gradcheck import check_gradients, gradient_check, relative_error


def test_relative_error_floor():
    # tiny analytic vs tiny FD noise should not register as a failure
    assert relative_error(0.0, 1e-10) < 1e-3
    assert relative_error(1.0, 1.0) == 0.0
    assert relative_error(1.0, 2.0) == 0.5


def test_quadratic_passes():
    g = torch.Generator().manual_seed(0)
    x = torch.randn(5, dtype=torch.float64, generator=g, requires_grad=True)
    report = check_gradients(lambda: (x**3).sum(), [("x", x)], tolerance=1e-5)
    assert report.passed
    assert report.groups[0].n_checked == 5


def test_unused_parameter_counts_as_zero_gradient():
    g = torch.Generator().manual_seed(1)
    x = torch.randn(3, dtype=torch.float64, generator=g, requires_grad=True)
    y = torch.randn(3, dtype=torch.float64, generator=g, requires_grad=True)
    report = check_gradients(lambda: (x**2).sum(), [("x", x), ("y", y)], tolerance=1e-5)
    assert report.passed


def test_subsampling_respects_max_entries():
    x = torch.randn(100, dtype=torch.float64, requires_grad=True)
    report = check_gradients(lambda: (x**2).sum(), [("x", x)], max_entries=8)
    assert report.groups[0].n_checked == 8


def test_full_model_passes(tiny_model, tiny_batch):
    report = gradient_check(tiny_model, tiny_batch, max_entries=4)
    assert report.passed, "\n".join(report.lines())


def test_corrupted_gradient_is_flagged(tiny_model, tiny_batch):
    # scaling one group's analytic gradient must fail exactly that group
    name = "prediction_head.fc2.weight"
    report = gradient_check(tiny_model, tiny_batch, max_entries=4, grad_scale={name: 2.0})
    failed = [g.name for g in report.groups if not g.passed]
    assert failed == [name]


def test_report_lines_format(tiny_model, tiny_batch):
    report = gradient_check(tiny_model, tiny_batch, max_entries=2)
    lines = report.lines()
    assert len(lines) == len(report.groups)
    assert all(line.startswith(("PASS", "FAIL")) for line in lines)
