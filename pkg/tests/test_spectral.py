import math

import numpy as np
import pytest

from quenchwall.errors import InvalidInput, ParameterDomainError
from quenchwall.spectral import (SPECTRAL_SCHEMA, SpectralProblem, assemble_generator, principal_eigenvalue,
                                 principal_eigenvalue_1d, results_to_csv, solve)


def test_one_dimensional_eigenvalue_is_mu():
    # first Dirichlet eigenfunction on (0, inf) is u = x, with eigenvalue mu
    for mu in (0.5, 1.0, 2.0):
        assert principal_eigenvalue_1d(mu, L=6.0, h=0.005) == pytest.approx(mu, rel=5e-3)


def test_zero_beta_decouples():
    # with beta = 0 only the first coordinate is constrained
    assert solve(1.5, 0.7, 0.0, L=6.0, h=0.05).lambda1 == pytest.approx(1.5, rel=1e-2)


@pytest.mark.parametrize("mu,beta", [(0.8, -2.0), (1.3, 0.3)])
def test_equal_rates_identity(mu, beta):
    # (X - beta Y) / sqrt(1 + beta^2) is again an OU process with rate mu
    assert solve(mu, mu, beta, L=6.0, h=0.05).lambda1 == pytest.approx(mu, rel=2e-2)


def test_reflection_symmetry_in_beta():
    a = solve(2.0, 1.0, 0.7, L=5.0, h=0.1).lambda1
    b = solve(2.0, 1.0, -0.7, L=5.0, h=0.1).lambda1
    assert a == pytest.approx(b, rel=1e-9)


def test_diffusion_stencil_rows_and_signs():
    asm = assemble_generator(SpectralProblem(1.0, 1.0, 0.6, L=3.0, h=0.1), diffusion_only=True)
    A = asm.matrix.tocsr()
    nnz = np.diff(A.indptr)
    sums = np.asarray(A.sum(axis=1)).ravel()
    # full five-point rows of the pure Laplacian sum to zero
    assert np.allclose(sums[nnz == 5], 0.0, atol=1e-9)
    assert np.all(sums >= -1e-9)
    full = assemble_generator(SpectralProblem(1.0, 2.0, 0.6, L=3.0, h=0.1)).matrix.tocoo()
    off = full.row != full.col
    assert np.all(full.data[off] <= 0)


def test_central_scheme_refuses_high_peclet():
    with pytest.raises(ParameterDomainError):
        assemble_generator(SpectralProblem(1.0, 1.0, 1.0, L=8.0, h=0.5, scheme="central"))
    small = SpectralProblem(0.5, 0.5, 0.0, L=2.0, h=0.05, scheme="central")
    assert small.peclet <= 2
    assert principal_eigenvalue(assemble_generator(small)).lambda1 > 0


def test_invalid_problems():
    with pytest.raises(ParameterDomainError):
        SpectralProblem(0.0, 1.0, 1.0)
    with pytest.raises(ParameterDomainError):
        principal_eigenvalue_1d(-1.0)
    with pytest.raises(InvalidInput):
        SpectralProblem(1.0, 1.0, 1.0, L=1.0, h=0.3)
    with pytest.raises(InvalidInput):
        SpectralProblem(1.0, 1.0, math.nan)


def test_mesh_refinement_converges():
    lams = [solve(2.0, 1.0, 0.5, L=5.0, h=h).lambda1 for h in (0.2, 0.1, 0.05)]
    assert abs(lams[2] - lams[1]) < abs(lams[1] - lams[0])


def test_truncation_check_and_csv():
    r = solve(1.0, 1.0, 1.0, L=5.0, h=0.1, check_truncation=True)
    assert r.truncation_shift < 1e-3
    assert r.truncation < 1e-3
    text = results_to_csv([r])
    header, row = text.strip().splitlines()
    assert header.split(",")[-1] == "schema" and row.endswith(SPECTRAL_SCHEMA)
