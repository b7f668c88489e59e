"""
Test pydantic models: schedules, solver configuration, spectra, Psi and the benchmark grid.
"""
import pytest
import numpy as np
from pathlib import Path
import sys

# Add the src directory to Python path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "src"))

from pydantic import ValidationError

from gradfamily.models.bench import DEFAULT_KM_KS, DEFAULT_METHODS, GridSpec
from gradfamily.models.problem import SpectrumSpec
from gradfamily.models.psi import PsiFunction
from gradfamily.models.schedule import ScheduleParseError, SolverConfig, parse_schedule


class TestParseSchedule:
    """Test the schedule string grammar."""

    @pytest.mark.parametrize("text", [
        "sd", "mg", "family:3", "bb1", "bb2", "yuan", "aopt", "dy",
        "sdc:8:6", "hat:2:2", "abbmin2:0.9:9", "alg1:bb1:sd:30:15:15",
        "alg1:bb2:mg:100:9:13", "alg1:bb1:u2:30:15:15", "alt:sd", "alt:mg",
    ])
    def test_label_round_trip(self, text):
        """Test parse_schedule(label) reproduces the schedule."""
        schedule = parse_schedule(text)
        assert schedule.label == text
        assert parse_schedule(schedule.label) == schedule

    def test_defaults(self):
        """Test default parameters of parameterized schedules."""
        assert parse_schedule("sdc").label == "sdc:8:6"
        assert parse_schedule("abbmin2").label == "abbmin2:0.9:9"
        assert parse_schedule("alg1:bb1:sd").label == "alg1:bb1:sd:30:15:15"
        assert parse_schedule("  MG ").label == "mg"

    def test_exponents(self):
        """Test Psi exponents of the family schedules."""
        assert parse_schedule("sd").u == 0
        assert parse_schedule("mg").u == 1
        assert parse_schedule("family:4").u == 4
        assert parse_schedule("alg1:bb2:u3").u == 3

    def test_method_name_and_params(self):
        """Test report grouping keys."""
        periodic = parse_schedule("alg1:bb1:mg:100:9:13")
        assert periodic.method_name == "alg1:bb1:mg"
        assert periodic.params == "Km=9;Ks=13"
        assert parse_schedule("sdc:8:6").params == "h=8;s=6"
        assert parse_schedule("abbmin2:0.8:5").params == "tau=0.8;m=5"
        assert parse_schedule("bb1").params == ""

    def test_warm_start_and_monotone(self):
        """Test schedule properties used by the solver."""
        assert parse_schedule("bb1").warm_start
        assert parse_schedule("alg1:bb1:sd").warm_start
        assert not parse_schedule("sd").warm_start
        assert parse_schedule("dy").monotone
        assert not parse_schedule("bb2").monotone

    @pytest.mark.parametrize("text", [
        "", "newton", "sd:1", "family", "family:x", "sdc:8", "abbmin2:1.5",
        "abbmin2:x", "alg1:bb3:sd", "alg1:bb1:zz", "alg1:bb1:sd:30:15",
        "alg1:bb1:sd:0:15:15", "alt", "hat:0:2",
    ])
    def test_rejects(self, text):
        """Test unknown tokens and out-of-range parameters raise."""
        with pytest.raises(ScheduleParseError):
            parse_schedule(text)

    def test_unknown_message(self):
        """Test the error names the offending text."""
        with pytest.raises(ScheduleParseError, match="unknown schedule 'newton'"):
            parse_schedule("newton")


def test_solver_config():
    """Test SolverConfig validation."""
    config = SolverConfig()
    assert config.epsilon == 1e-6
    assert config.trace_level == "scalars"
    assert SolverConfig(alpha0_rule="fixed:0.5").alpha0_rule == "fixed:0.5"

    for fields in (
        {"epsilon": 0.0}, {"epsilon": 1.0}, {"max_iter": 0}, {"trace_level": "full"},
        {"alpha0_rule": "fixed:-1"}, {"alpha0_rule": "fixed:abc"}, {"alpha0_rule": "bb"},
    ):
        with pytest.raises(ValidationError):
            SolverConfig(**fields)


def test_spectrum_spec():
    """Test SpectrumSpec validation and metadata."""
    spec = SpectrumSpec(set_id=3, n=100, kappa=1e4, seed=9)
    assert spec.label == "set3"
    assert spec.to_metadata((-10.0, 10.0)) == {
        "set_id": "3", "n": "100", "kappa": "10000.0", "seed": "9", "b_range": "-10.0:10.0",
    }
    assert SpectrumSpec(named="isqrt", n=10).to_metadata()["set_id"] == "isqrt"

    with pytest.raises(ValidationError, match="exactly one"):
        SpectrumSpec(n=10, kappa=10.0)
    with pytest.raises(ValidationError, match="exactly one"):
        SpectrumSpec(set_id=1, named="isqrt", n=10, kappa=10.0)
    with pytest.raises(ValidationError, match="kappa is required"):
        SpectrumSpec(set_id=1, n=10)
    with pytest.raises(ValidationError):
        SpectrumSpec(set_id=8, n=10, kappa=10.0)
    with pytest.raises(ValidationError):
        SpectrumSpec(set_id=1, n=1, kappa=10.0)
    with pytest.raises(ValidationError):
        SpectrumSpec(set_id=1, n=10, kappa=1.0)
    with pytest.raises(ValidationError):
        SpectrumSpec(named="twodim", n=3, kappa=10.0)


def test_psi_function():
    """Test Psi representations and their evaluation."""
    lam = np.array([1.0, 2.0, 4.0])

    np.testing.assert_array_equal(PsiFunction.monomial(2).values(lam), [1.0, 4.0, 16.0])
    np.testing.assert_array_equal(PsiFunction.constant_fn(3.0).values(lam), [3.0, 3.0, 3.0])
    table = PsiFunction.from_table(lam, [5.0, 6.0, 7.0])
    assert table.evaluate(2.0) == 6.0
    assert [PsiFunction.monomial(u).label for u in (0, 1, 3)] == ["I", "A", "A^3"]

    assert PsiFunction.monomial(1).matrix_exponent(0.5) is None
    assert PsiFunction.monomial(2).matrix_exponent(0.5) == 1
    assert table.matrix_exponent(1.0) is None
    assert PsiFunction.constant_fn(4.0).scale(0.5) == 2.0

    with pytest.raises(ValueError, match="no value"):
        table.evaluate(3.0)
    with pytest.raises(ValueError):
        PsiFunction.from_table([1.0], [0.0])
    with pytest.raises(ValueError):
        PsiFunction.from_table([1.0, 2.0], [1.0])


class TestGridSpec:
    """Test benchmark grid validation."""

    def test_defaults(self):
        """Test the default grid."""
        spec = GridSpec()
        assert spec.sets == [1, 2, 3, 4, 5, 6, 7]
        assert spec.kappas == [1e4, 1e5, 1e6]
        assert spec.replicates == 10
        assert spec.methods == DEFAULT_METHODS
        assert len(DEFAULT_KM_KS) == 9

    def test_kb_policy(self):
        """Test per-set and fixed Kb."""
        spec = GridSpec()
        assert [spec.kb_for(s) for s in range(1, 8)] == [100, 30, 30, 30, 100, 30, 30]
        assert GridSpec(kb_policy="40").kb_for(1) == 40
        assert GridSpec(kb_policy=12).kb_for(5) == 12

    @pytest.mark.parametrize("fields", [
        {"replicates": 0},
        {"sets": [0]},
        {"sets": [8]},
        {"sets": []},
        {"kappas": [1.0]},
        {"epsilons": [1.0]},
        {"methods": ["newton"]},
        {"km_ks": [(0, 9)]},
        {"kb_policy": "sometimes"},
        {"kb_policy": 0},
        {"workers": 0},
    ])
    def test_rejects(self, fields):
        """Test invalid grids raise."""
        with pytest.raises(ValidationError):
            GridSpec(**fields)
