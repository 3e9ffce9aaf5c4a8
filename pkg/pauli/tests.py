import itertools

import numpy as np
from django.test import SimpleTestCase, override_settings

from experiments.exceptions import CapacityError, ParameterError, SingularChannelError
from .services.channels import (
    NoiseParams,
    channel_N_coefficient,
    depolarize_coefficient,
    depolarize_dense,
    from_pauli_coefficients,
    inverse_channel_coefficient,
    invert_depolarizing_dense,
    pauli_coefficients,
)
from .services.strings import PauliString, all_paulis, dense, weight


def P(label, phase=0):
    return PauliString.from_label(label, phase)


class PauliStringTest(SimpleTestCase):
    """Test Pauli string weights, products and dense forms"""

    def test_weight(self):
        """Weight counts non-identity sites"""
        self.assertEqual(weight(P('XIZ')), 2)
        self.assertEqual(weight(PauliString.identity(4)), 0)
        self.assertEqual(weight(P('YYYYY')), 5)

    def test_dense_single_site(self):
        """Single-site matrices match the textbook Paulis"""
        np.testing.assert_array_equal(dense(P('X')), [[0, 1], [1, 0]])
        np.testing.assert_array_equal(dense(P('Z')), [[1, 0], [0, -1]])
        self.assertAlmostEqual(abs(np.trace(dense(P('XZ')))), 0.0)

    def test_dense_hermitian_unitary(self):
        """Phase-free strings are Hermitian and unitary"""
        for p in all_paulis(2):
            m = dense(p)
            np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
            np.testing.assert_allclose(m @ m, np.eye(4), atol=1e-12)

    def test_products_match_dense(self):
        """Symplectic products agree with matrix products for all 2-site pairs"""
        paulis = list(all_paulis(2))
        for p, q in itertools.product(paulis, paulis):
            np.testing.assert_allclose(dense(p) @ dense(q), dense(p * q), atol=1e-12)

    def test_commutation(self):
        """Symplectic form decides commutation"""
        for p, q in itertools.product(all_paulis(2), repeat=2):
            commute = np.allclose(dense(p) @ dense(q), dense(q) @ dense(p))
            self.assertEqual(p.commutes(q), commute)

    def test_label_roundtrip_and_errors(self):
        """Labels parse and invalid labels raise"""
        self.assertEqual(P('XYZI').label, 'XYZI')
        self.assertEqual(str(P('X', 2)), '-X')
        with self.assertRaises(ParameterError):
            P('XQ')

    @override_settings(UPLOADLAB={'OUTPUT_DIR': '/tmp', 'MAX_DENSE_QUBITS': 3})
    def test_dense_cap(self):
        """Dense materialization above the cap raises CapacityError"""
        with self.assertRaises(CapacityError):
            dense(PauliString.identity(4))


class ChannelCoefficientTest(SimpleTestCase):
    """Test the diagonal channel coefficients"""

    def test_depolarize(self):
        """(1-lambda)**w"""
        self.assertEqual(depolarize_coefficient(PauliString.identity(3), 0.3), 1.0)
        self.assertAlmostEqual(depolarize_coefficient(P('XI'), 0.1), 0.9)
        self.assertAlmostEqual(depolarize_coefficient(P('XZ'), 0.1), 0.81)
        with self.assertRaises(ParameterError):
            depolarize_coefficient(P('X'), 1.5)

    def test_channel_n(self):
        """(1-lambda)**(w + ceil(w/2))"""
        self.assertEqual(channel_N_coefficient(PauliString.identity(2), 0.5), 1.0)
        self.assertAlmostEqual(channel_N_coefficient(P('XZ'), 0.1), 0.729)
        self.assertAlmostEqual(channel_N_coefficient(P('XYZ'), 0.3), 0.7 ** 5)

    def test_inverse(self):
        """Inverse coefficient undoes depolarization"""
        self.assertEqual(inverse_channel_coefficient(PauliString.identity(3), 0.2), 1.0)
        self.assertAlmostEqual(inverse_channel_coefficient(P('Z'), 0.2), 1.25)
        for p in all_paulis(2):
            for lam in (0.05, 0.4, 0.9):
                product = inverse_channel_coefficient(p, lam) * depolarize_coefficient(p, lam)
                self.assertAlmostEqual(product, 1.0, places=12)
                self.assertLessEqual(channel_N_coefficient(p, lam), depolarize_coefficient(p, lam))
        with self.assertRaises(SingularChannelError):
            inverse_channel_coefficient(P('Z'), 1.0)

    def test_noise_params(self):
        """Derived strengths"""
        noise = NoiseParams(lambda_raw=0.1, lambda_inj=0.12)
        self.assertAlmostEqual(noise.eta, 0.9)
        self.assertAlmostEqual(noise.a, 0.88)
        with self.assertRaises(ParameterError):
            NoiseParams(lambda_raw=-0.1)


class DenseChannelTest(SimpleTestCase):
    """Test the dense Pauli-basis transforms"""

    def setUp(self):
        rng = np.random.default_rng(17)
        self.matrices = []
        for _ in range(5):
            a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            self.matrices.append(a + a.conj().T)

    def test_coefficients_match_traces(self):
        """c_k = tr(P_k M) / 2**n"""
        m = self.matrices[0]
        coefficients = pauli_coefficients(m)
        for index, p in zip(np.ndindex(4, 4), all_paulis(2)):
            self.assertAlmostEqual(coefficients[index], np.trace(dense(p) @ m) / 4.0, places=12)
        np.testing.assert_allclose(from_pauli_coefficients(coefficients), m, atol=1e-12)

    def test_depolarize_matches_explicit_channel(self):
        """Coefficient scaling equals the explicit Kraus application of D on each qubit"""
        lam = 0.23
        kraus_single = [np.sqrt(1 - 3 * lam / 4) * np.eye(2)] + [
            np.sqrt(lam / 4) * dense(P(label)) for label in 'XYZ'
        ]
        kraus = [np.kron(a, b) for a in kraus_single for b in kraus_single]
        for m in self.matrices:
            explicit = sum(k @ m @ k.conj().T for k in kraus)
            np.testing.assert_allclose(depolarize_dense(m, lam), explicit, atol=1e-12)

    def test_inverse_dense(self):
        """Inverting the dense channel recovers the input"""
        m = self.matrices[1]
        np.testing.assert_allclose(invert_depolarizing_dense(depolarize_dense(m, 0.3), 0.3), m, atol=1e-10)
