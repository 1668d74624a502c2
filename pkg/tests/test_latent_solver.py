import numpy as np
import pytest

from quatdeblur.errors import SingularSystemError
from quatdeblur.image_domain import GradientField
from quatdeblur.latent_solver import (
    LatentDiagnostics,
    beta_schedule,
    build_fourier_system,
    hqs_objective,
    normal_equation_residual,
    solve_fourier_system,
    solve_latent,
    threshold_gradients,
)
from quatdeblur.metrics import psnr
from quatdeblur.pipeline import motion_psf, synth_blur
from quatdeblur.quat_core import QuatKernel


def blocky_image(rng, m=32, n=32, block=8):
    """Piecewise-constant colour image (few strong edges)."""
    small = rng.random((m // block, n // block, 3))
    return np.kron(small, np.ones((block, block, 1)))


def random_field(rng, shape):
    return GradientField(rng.standard_normal(shape), rng.standard_normal(shape))


def test_beta_schedule_defaults():
    betas = beta_schedule(0.004)
    assert len(betas) == 10
    assert betas[0] == 0.008 and betas[-1] == pytest.approx(4.096)
    assert beta_schedule(0.004, beta0=1.0, beta_max=8.0) == [1.0, 2.0, 4.0]
    with pytest.raises(ValueError):
        beta_schedule(0.004, beta0=16.0)
    with pytest.raises(ValueError):
        beta_schedule(0.004, beta0=-1.0)


def test_threshold_rejects_bad_weights():
    with pytest.raises(ValueError):
        threshold_gradients(np.zeros((4, 4, 3)), 0.0, 1.0)


def test_u_step_solves_normal_equations(rng):
    k = QuatKernel(np.concatenate([rng.random((1, 5, 5)), 0.1 * rng.standard_normal((3, 5, 5))]))
    f = rng.random((20, 18, 3))
    v = random_field(rng, f.shape)
    beta = 0.5
    uq = solve_fourier_system(build_fourier_system(k, f, v, beta), full=True)
    assert normal_equation_residual(f, k, uq, v, beta) < 1e-12


def test_u_step_minimises_split_objective(rng):
    k = QuatKernel(rng.standard_normal((4, 3, 3)))
    f = rng.random((12, 12, 3))
    v = random_field(rng, f.shape)
    beta = 0.3
    uq = solve_fourier_system(build_fourier_system(k, f, v, beta), full=True)
    best = hqs_objective(f, k, uq, v, 0.01, beta)
    for _ in range(10):
        assert hqs_objective(f, k, uq + 1e-3 * rng.standard_normal(uq.shape), v, 0.01, beta) > best


def test_identity_kernel_keeps_blocky_image(rng):
    u = blocky_image(rng)
    # Every block edge must clear the final threshold lam / beta for the image to survive intact.
    out = solve_latent(u, QuatKernel.identity(3), 0.0005)
    assert psnr(np.clip(out, 0, 1), u) >= 60.0


def test_nonblind_restore_of_blocky_image(rng):
    u = blocky_image(rng, 48, 48)
    k = QuatKernel.from_components(motion_psf(7, length=5, angle=20))
    f = synth_blur(u, k)
    out = solve_latent(f, k, 0.002)
    assert psnr(out, u) > psnr(f, u) + 5.0


def test_diagnostics_are_filled(rng):
    u = blocky_image(rng)
    diag = LatentDiagnostics()
    solve_latent(u, QuatKernel.identity(1), 0.004, diagnostics=diag)
    assert diag.iterations == 10
    assert diag.betas == beta_schedule(0.004)
    assert all(0.0 <= x <= 1.0 for x in diag.kept_fraction)
    assert len(diag.real_part_max) == 10


def test_zero_kernel_is_singular():
    f = np.zeros((8, 8, 3))
    v = GradientField(np.zeros(f.shape), np.zeros(f.shape))
    with pytest.raises(SingularSystemError) as exc:
        solve_fourier_system(build_fourier_system(QuatKernel(np.zeros((4, 3, 3))), f, v, 1.0))
    assert exc.value.index == (0, 0)


def test_shape_mismatch():
    v = GradientField(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)))
    with pytest.raises(ValueError):
        build_fourier_system(QuatKernel.identity(1), np.zeros((5, 5, 3)), v, 1.0)
    with pytest.raises(ValueError):
        solve_latent(np.zeros((5, 5, 3)), QuatKernel.identity(1), 0.0)
