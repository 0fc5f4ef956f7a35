import numpy as np
import pytest

from fadellr.constellation import SnrSpec, build_constellation, snr_to_sigma


@pytest.fixture(scope="session")
def bpsk():
    return build_constellation("bpsk")


@pytest.fixture(scope="session")
def pam8():
    return build_constellation("pam8")


@pytest.fixture(scope="session")
def qam16():
    return build_constellation("qam16")


@pytest.fixture(scope="session")
def sigma_pam_791(pam8):
    # the paper's 8-PAM operating point
    return snr_to_sigma(pam8, SnrSpec(7.91, "esn0"))


@pytest.fixture(scope="session")
def sigma_qam_483(qam16):
    # true-LLR threshold of the 16-QAM scheme, the paper's fit point
    return snr_to_sigma(qam16, SnrSpec(4.83, "esn0"))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


# Operating points for the desk-scale BER acceptance runs (n=4000 (3,4)
# code), calibrated so the curves straddle BER 1e-4 with headroom.
@pytest.fixture(scope="session")
def pam_ber_points():
    return (9.7, 10.1, 10.5)


@pytest.fixture(scope="session")
def qam_ber_points():
    return (6.3, 6.7, 7.1)
