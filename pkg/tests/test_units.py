import numpy as np
import pytest

from ajtwin.errors import RejectedInputError
from ajtwin.units import from_si, to_si


def test_sccm_definition():
    assert to_si(1.0, "sccm") == pytest.approx(1.6667e-8, rel=1e-4)


def test_zero_micron():
    assert to_si(0.0, "um") == 0.0


def test_sixty_sccm_is_one_ccs():
    # 60 cm^3/min = 1 cm^3/s = 1e-6 m^3/s
    assert to_si(60.0, "sccm") == pytest.approx(1e-6, rel=1e-12)


def test_unknown_unit_rejected():
    with pytest.raises(RejectedInputError):
        to_si(1.0, "furlong")


def test_unicode_aliases():
    assert to_si(1.0, "µm") == to_si(1.0, "um")
    assert to_si(2.0, "μm") == 2e-6


@pytest.mark.parametrize("unit", ["um", "mL", "sccm", "mA", "Pa", "m", "m3",
                                  "m3/s", "A"])
def test_round_trip(unit):
    rng = np.random.default_rng(1)
    for value in rng.uniform(1e-9, 1e6, 50):
        back = from_si(to_si(value, unit), unit)
        assert back == pytest.approx(value, rel=1e-12)
