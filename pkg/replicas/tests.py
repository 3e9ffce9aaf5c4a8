import numpy as np
from django.test import SimpleTestCase

from experiments.exceptions import CapacityError, SingularChannelError
from pauli.services.channels import depolarize_dense
from .services.cycle import (
    OMEGA,
    alpha_closed_form,
    alpha_omega_modulus_sq,
    corrected_cycle_observable,
    cycle_observable,
    cycle_spectral_data,
    copy_major_to_site_major,
    site_major_to_copy_major,
)
from .services.delta3 import (
    build_delta3,
    g_poly,
    kappa,
    r_poly,
    trace_N_delta3_squared,
    trace_N_delta3_squared_dense,
    trace_pi_delta3,
)
from .services.permutations import build_symmetrizer, cycle_operator, permutation_operator, swap_operator


def random_density(n, rng):
    dim = 2 ** n
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def triple(rho):
    return np.kron(np.kron(rho, rho), rho)


class PermutationTest(SimpleTestCase):
    """Test permutation operators and symmetrizers"""

    def test_swap_acts_on_product_states(self):
        """SWAP exchanges the two factors of a product state"""
        rng = np.random.default_rng(1)
        u, v = rng.normal(size=4), rng.normal(size=4)
        np.testing.assert_allclose(swap_operator(0, 1, 2) @ np.kron(u, v), np.kron(v, u))

    def test_cycle_inverse(self):
        """pi and pi^-1 multiply to the identity"""
        np.testing.assert_allclose(cycle_operator(1) @ cycle_operator(1, inverse=True), np.eye(8))

    def test_cycle_trace_identity(self):
        """tr(pi rho1 x rho2 x rho3) is a trace of the ordered product"""
        rng = np.random.default_rng(2)
        rhos = [random_density(1, rng) for _ in range(3)]
        value = np.trace(cycle_operator(1) @ np.kron(np.kron(rhos[0], rhos[1]), rhos[2]))
        candidates = [np.trace(rhos[0] @ rhos[1] @ rhos[2]), np.trace(rhos[0] @ rhos[2] @ rhos[1])]
        self.assertTrue(any(abs(value - c) < 1e-12 for c in candidates))

    def test_symmetrizers(self):
        """Normalized symmetrizers have unit trace and the expected spectrum"""
        np.testing.assert_allclose(build_symmetrizer((0,), 1).matrix, np.eye(2) / 2)
        self.assertAlmostEqual(np.trace(build_symmetrizer((0, 1, 2), 1).matrix), 1.0)
        eigenvalues = np.sort(np.linalg.eigvalsh(build_symmetrizer((0, 1), 1).matrix))
        np.testing.assert_allclose(eigenvalues, [0, 1 / 3, 1 / 3, 1 / 3], atol=1e-12)
        s12 = build_symmetrizer((0, 1), 2).matrix
        np.testing.assert_allclose(s12, s12.conj().T, atol=1e-12)

    def test_permutation_is_orthogonal(self):
        """Permutation matrices are orthogonal"""
        p = permutation_operator((2, 0, 1), 3, 3)
        np.testing.assert_allclose(p @ p.T, np.eye(27))


class Delta3Test(SimpleTestCase):
    """Test Delta_3 and its closed-form traces"""

    def test_single_qubit_is_zero(self):
        """Delta_3 vanishes for one qubit per copy"""
        self.assertLessEqual(np.abs(build_delta3(1).matrix).max(), 1e-12)
        for eta in (0.0, 0.3, 0.7, 1.0):
            self.assertAlmostEqual(r_poly(1, eta), 0.0, places=12)

    def test_two_qubits(self):
        """tr(Delta_3^2) at n=2 and tr(Delta_3) = 0"""
        delta = build_delta3(2).matrix
        self.assertAlmostEqual(np.trace(delta @ delta).real, 360 / 57600, places=14)
        for n in (1, 2, 3):
            self.assertAlmostEqual(np.trace(build_delta3(n).matrix).real, 0.0, places=12)
        np.testing.assert_allclose(delta, delta.T, atol=1e-12)

    def test_polynomials(self):
        """Closed-form polynomial values"""
        self.assertEqual(r_poly(2, 1.0), 360)
        self.assertEqual(r_poly(3, 0.0), 0)
        self.assertEqual(g_poly(1, 1.0), 0)
        self.assertEqual(g_poly(2, 1.0), 180)
        self.assertAlmostEqual(kappa(1.0), 1.0)
        self.assertAlmostEqual(kappa(0.0), 125 / 64)
        values = [kappa(lam) for lam in np.linspace(0, 1, 11)]
        self.assertTrue(all(x >= y for x, y in zip(values, values[1:])))

    def test_trace_n_matches_dense(self):
        """Closed-form tr(N(Delta_3)^2) agrees with the dense Pauli-basis oracle"""
        self.assertEqual(trace_N_delta3_squared(1, 0.4), 0.0)
        self.assertAlmostEqual(trace_N_delta3_squared(2, 0.0), 360 / (64 * 25 * 36), places=15)
        for n in (2, 3):
            for lam in (0.0, 0.1, 0.3):
                closed = trace_N_delta3_squared(n, lam)
                oracle = trace_N_delta3_squared_dense(n, lam)
                self.assertLessEqual(abs(closed - oracle) / closed, 1e-10)

    def test_trace_pi_delta3(self):
        """tr(pi Delta_3) = (D-1)(D-2)/D^2"""
        for n in (1, 2, 3):
            dense_value = np.trace(cycle_operator(n) @ build_delta3(n).matrix).real
            self.assertAlmostEqual(dense_value, trace_pi_delta3(n), places=12)

    def test_capacity(self):
        """Three copies above the replica cap are refused"""
        with self.assertRaises(CapacityError):
            build_delta3(5)
        with self.assertRaises(CapacityError):
            trace_N_delta3_squared_dense(4, 0.1)


class CycleTest(SimpleTestCase):
    """Test the cycle observable and its deconvolution"""

    def test_noiseless_spectrum(self):
        """Without noise h is the cycle itself"""
        data = cycle_spectral_data(0.0)
        self.assertAlmostEqual(data.alpha_1, 1.0, places=12)
        self.assertAlmostEqual(abs(data.alpha_omega - OMEGA), 0.0, places=12)
        self.assertEqual(data.ranks, (4, 2, 2))

    def test_projectors(self):
        """Projectors resolve the identity and are orthogonal idempotents"""
        projectors = cycle_spectral_data(0.2).projectors
        np.testing.assert_allclose(sum(projectors), np.eye(8), atol=1e-12)
        for i, p in enumerate(projectors):
            np.testing.assert_allclose(p @ p, p, atol=1e-12)
            for j, q in enumerate(projectors):
                if i != j:
                    np.testing.assert_allclose(p @ q, np.zeros((8, 8)), atol=1e-12)

    def test_alpha_closed_forms(self):
        """Deconvolved eigenvalues match their closed forms"""
        for lam in (0.05, 0.2, 0.4):
            data = cycle_spectral_data(lam)
            alpha_1, alpha_omega = alpha_closed_form(lam)
            self.assertAlmostEqual(data.alpha_1, alpha_1, places=10)
            self.assertAlmostEqual(abs(data.alpha_omega - alpha_omega), 0.0, places=10)
            self.assertAlmostEqual(abs(data.alpha_omega) ** 2, alpha_omega_modulus_sq(data.a), places=10)
        self.assertAlmostEqual(alpha_omega_modulus_sq(1.0), 1.0)
        with self.assertRaises(SingularChannelError):
            cycle_spectral_data(1.0)

    def test_cycle_observable_gives_third_moment(self):
        """tr(H rho^{(x)3}) = tr(rho^3)"""
        rng = np.random.default_rng(3)
        for n in (1, 2):
            h = cycle_observable(n)
            for _ in range(25):
                rho = random_density(n, rng)
                expected = np.trace(rho @ rho @ rho).real
                self.assertAlmostEqual(np.trace(h @ triple(rho)).real, expected, places=10)

    def test_corrected_observable_deconvolves(self):
        """tr(H_corrected (D rho)^{(x)3}) = tr(rho^3)"""
        rng = np.random.default_rng(4)
        for n in (1, 2):
            for lam in (0.1, 0.3):
                h = corrected_cycle_observable(n, lam)
                rho = random_density(n, rng)
                noisy = depolarize_dense(rho, lam)
                expected = np.trace(rho @ rho @ rho).real
                self.assertAlmostEqual(np.trace(h @ triple(noisy)).real, expected, places=9)

    def test_reordering_roundtrip(self):
        """Site-major and copy-major reorderings are inverse to each other"""
        rng = np.random.default_rng(5)
        m = rng.normal(size=(64, 64))
        np.testing.assert_allclose(copy_major_to_site_major(site_major_to_copy_major(m, 2), 2), m)
