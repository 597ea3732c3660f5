import numpy as np
import pytest

from regretlab.autodiff import (Tensor, as_tensor, concat, diag_gauss_logpdf, l2norm,
                                maximum, minimum)
from regretlab.errors import NumericError

from conftest import rel_err


def fd_grad(f, x, h=1e-5):
    """Central finite differences of a scalar numpy function."""
    g = np.zeros_like(x, dtype=float)
    flat_x, flat_g = x.ravel(), g.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        hi = f(x)
        flat_x[i] = orig - h
        lo = f(x)
        flat_x[i] = orig
        flat_g[i] = (hi - lo) / (2.0 * h)
    return g


def tape_grad(expr, x):
    t = Tensor(x, requires_grad=True)
    expr(t).backward()
    return t.grad


# Each case: (tape expression, equivalent numpy function, sample input).
# Inputs avoid kinks so two-sided differences are valid.
CASES = [
    ("add", lambda t: (t + 2.5).sum(), lambda x: float((x + 2.5).sum()),
     np.array([[0.3, -1.2], [2.0, 0.7]])),
    ("mul", lambda t: (t * t * 3.0).sum(), lambda x: float((x * x * 3.0).sum()),
     np.array([0.5, -0.25, 1.5])),
    ("div", lambda t: (1.0 / t).sum(), lambda x: float((1.0 / x).sum()),
     np.array([0.8, -1.3, 2.2])),
    ("pow", lambda t: (t**3).sum(), lambda x: float((x**3).sum()),
     np.array([0.4, -0.9])),
    ("matmul", lambda t: (t @ np.array([[1.0, 2.0], [3.0, -1.0]])).sum(),
     lambda x: float((x @ np.array([[1.0, 2.0], [3.0, -1.0]])).sum()),
     np.array([[0.2, 0.6], [-0.4, 1.1]])),
    ("tanh", lambda t: t.tanh().sum(), lambda x: float(np.tanh(x).sum()),
     np.array([0.3, -2.0, 0.9])),
    ("relu", lambda t: (t.relu() * t).sum(), lambda x: float((np.maximum(x, 0) * x).sum()),
     np.array([0.5, -0.8, 1.4])),
    ("exp", lambda t: t.exp().sum(), lambda x: float(np.exp(x).sum()),
     np.array([0.1, -1.0])),
    ("log", lambda t: t.log().sum(), lambda x: float(np.log(x).sum()),
     np.array([0.7, 2.3])),
    ("mean_axis", lambda t: (t.mean(axis=0) ** 2).sum(), lambda x: float((x.mean(axis=0) ** 2).sum()),
     np.array([[0.1, 0.5], [0.7, -0.2], [0.4, 0.9]])),
    ("sum_axis", lambda t: (t.sum(axis=1) ** 2).sum(), lambda x: float((x.sum(axis=1) ** 2).sum()),
     np.array([[0.1, 0.5], [0.7, -0.2]])),
    ("max", lambda t: t.max() * 2.0, lambda x: float(x.max() * 2.0),
     np.array([0.3, 1.7, -0.4])),
    ("clip", lambda t: (t.clip(-1.0, 1.0) ** 2).sum(), lambda x: float((np.clip(x, -1, 1) ** 2).sum()),
     np.array([0.5, -1.8, 2.3, 0.1])),
    ("minimum", lambda t: minimum(t, 0.4).sum(), lambda x: float(np.minimum(x, 0.4).sum()),
     np.array([0.1, 0.9, -0.5])),
    ("maximum", lambda t: maximum(t, -0.2).sum(), lambda x: float(np.maximum(x, -0.2).sum()),
     np.array([0.1, -0.9, 0.5])),
    ("l2norm", lambda t: l2norm(t, axis=1).sum(), lambda x: float(np.linalg.norm(x, axis=1).sum()),
     np.array([[0.3, 0.4], [1.0, -2.0]])),
    ("slice", lambda t: (t[:, 1:] ** 2).sum(), lambda x: float((x[:, 1:] ** 2).sum()),
     np.array([[0.1, 0.5, 0.7], [0.2, -0.4, 0.9]])),
    ("concat", lambda t: (concat([t, t * 2.0], axis=1)).sum(),
     lambda x: float(np.concatenate([x, x * 2.0], axis=1).sum()),
     np.array([[0.4, -0.7], [0.2, 0.9]])),
    ("reshape", lambda t: (t.reshape(4) ** 2).sum(), lambda x: float((x.reshape(4) ** 2).sum()),
     np.array([[0.3, -0.6], [1.2, 0.5]])),
    ("repeat_rows", lambda t: (t.repeat_rows(3) * np.arange(6.0)[:, None]).sum(),
     lambda x: float((np.repeat(x, 3, axis=0) * np.arange(6.0)[:, None]).sum()),
     np.array([[0.4, -0.7], [0.2, 0.9]])),
]


@pytest.mark.parametrize("name,expr,npf,x", CASES, ids=[c[0] for c in CASES])
def test_finite_difference_agreement(name, expr, npf, x):
    analytic = tape_grad(expr, x.copy())
    numeric = fd_grad(npf, x.copy())
    assert rel_err(analytic, numeric) < 1e-4


def test_gauss_logpdf_gradients():
    x = np.array([[0.3, -0.5], [1.1, 0.2]])
    mu0 = np.array([0.1, -0.2])
    ls0 = np.array([-0.5, 0.3])

    def np_loss(mu, ls):
        std = np.exp(ls)
        q = ((x - mu) / std) ** 2
        return float((-0.5 * q.sum(axis=1) - ls.sum() - np.log(2 * np.pi)).sum())

    mu_t = Tensor(mu0.copy(), requires_grad=True)
    ls_t = Tensor(ls0.copy(), requires_grad=True)
    diag_gauss_logpdf(x, mu_t, ls_t).sum().backward()
    assert rel_err(mu_t.grad, fd_grad(lambda m: np_loss(m, ls0), mu0.copy())) < 1e-4
    assert rel_err(ls_t.grad, fd_grad(lambda s: np_loss(mu0, s), ls0.copy())) < 1e-4


def test_broadcast_gradients():
    a0 = np.array([[1.0, 2.0], [3.0, 4.0]])
    b0 = np.array([10.0, 20.0])
    a = Tensor(a0, requires_grad=True)
    b = Tensor(b0, requires_grad=True)
    ((a * b) + b).sum().backward()
    assert np.allclose(a.grad, np.tile(b0, (2, 1)))
    assert np.allclose(b.grad, a0.sum(axis=0) + 2.0)


class TestSubgradientConventions:
    """Kinked ops take the derivative of the first-listed branch at ties."""

    def test_relu_at_zero(self):
        t = Tensor(np.array([0.0, -0.0]), requires_grad=True)
        t.relu().sum().backward()
        assert np.allclose(t.grad, [1.0, 1.0])

    def test_minimum_tie_first_argument(self):
        a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        b = Tensor(np.array([1.0, 3.0]), requires_grad=True)
        minimum(a, b).sum().backward()
        assert np.allclose(a.grad, [1.0, 1.0])
        assert np.allclose(b.grad, [0.0, 0.0])

    def test_maximum_tie_first_argument(self):
        a = Tensor(np.array([1.0]), requires_grad=True)
        b = Tensor(np.array([1.0]), requires_grad=True)
        maximum(a, b).sum().backward()
        assert a.grad[0] == 1.0 and b.grad[0] == 0.0

    def test_clip_boundary_passes_gradient(self):
        t = Tensor(np.array([-1.0, 1.0, 1.5, -2.0]), requires_grad=True)
        t.clip(-1.0, 1.0).sum().backward()
        assert np.allclose(t.grad, [1.0, 1.0, 0.0, 0.0])

    def test_max_tie_first_index(self):
        t = Tensor(np.array([2.0, 2.0, 1.0]), requires_grad=True)
        t.max().backward()
        assert np.allclose(t.grad, [1.0, 0.0, 0.0])

    def test_l2norm_zero_subgradient(self):
        t = Tensor(np.zeros((1, 3)), requires_grad=True)
        l2norm(t, axis=1).sum().backward()
        assert np.allclose(t.grad, 0.0)


def test_backward_requires_scalar():
    t = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        (t * 2).backward()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_loss_names_offending_op():
    t = Tensor(np.array([-1.0]), requires_grad=True)
    bad = t.log()  # log of a negative number
    with pytest.raises(NumericError, match="log"):
        bad.sum().backward()


def test_gradient_accumulates_over_reuse():
    t = Tensor(np.array([3.0]), requires_grad=True)
    (t * t + t).backward()  # d/dt (t^2 + t) = 2t + 1
    assert np.allclose(t.grad, [7.0])


def test_constants_carry_no_gradient():
    c = as_tensor(np.ones(2))
    t = Tensor(np.ones(2), requires_grad=True)
    (t * c).sum().backward()
    assert c.grad is None
    assert np.allclose(t.grad, 1.0)
