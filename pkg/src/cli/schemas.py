"""
JSON config schemas for the CLI commands

Each command reads at most one JSON object; ``--set key=value`` overrides are
applied to that object before validation, so every field below can be given
either way.
"""

from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from src.sparse_guarantees.experiments import DictionarySpec
from src.sparse_guarantees.estimators import EstimatorKind


class EstimateConfig(BaseModel):
    """Single-shot estimation request."""
    dictionary: DictionarySpec = Field(..., description="Dictionary source")
    b_path: str = Field(..., description="CSV file with one measurement per line")
    estimator: EstimatorKind = Field(..., description="Estimator tag")
    s: Optional[int] = Field(None, ge=1, description="Sparsity (thresholding, omp, guarantee echo)")
    support: Optional[List[int]] = Field(None, description="True support (oracle)")
    gamma: Optional[float] = Field(None, gt=0, description="BPDN regularization")
    tau: Optional[float] = Field(None, ge=0, description="Dantzig constraint level")
    alpha: float = Field(1.0, ge=0, description="Confidence constant for parameter selection and the guarantee echo")
    sigma: Optional[float] = Field(None, ge=0, description="Noise level; selects tau/gamma when they are absent")
    x_min: Optional[float] = Field(None, gt=0)
    x_max: Optional[float] = Field(None, gt=0)
    tol: Optional[float] = Field(None, gt=0, description="Solver tolerance override")

    @model_validator(mode="after")
    def _check_parameters(self) -> "EstimateConfig":
        if self.estimator is EstimatorKind.ORACLE and not self.support:
            raise ValueError("oracle estimator needs 'support'")
        if self.estimator in (EstimatorKind.THRESHOLDING, EstimatorKind.OMP) and self.s is None:
            raise ValueError(f"{self.estimator.value} estimator needs 's'")
        if self.estimator is EstimatorKind.BPDN and self.gamma is None and self.sigma is None:
            raise ValueError("bpdn estimator needs 'gamma' or 'sigma'")
        if self.estimator is EstimatorKind.DANTZIG and self.tau is None and self.sigma is None:
            raise ValueError("dantzig estimator needs 'tau' or 'sigma'")
        if self.x_min is not None and self.x_max is not None and self.x_min > self.x_max:
            raise ValueError("x_min must not exceed x_max")
        return self


class VerifyConfig(BaseModel):
    """Desk-scale acceptance checks run by the ``verify`` command."""
    master_seed: int = 0
    dictionary_path: Optional[str] = Field(None, description="Optional dictionary CSV to inspect")
    coherence_sizes: List[int] = Field([256, 512], description="Two-ortho sizes checked against 1/sqrt(n)")
    lemma_dictionaries: int = Field(10, ge=1, description="Random Gaussian dictionaries for the brute-force check")
    lemma_n: int = Field(8, ge=2)
    lemma_m: int = Field(12, ge=2)
    lemma_max_s: int = Field(3, ge=1)
    certificate_instances: int = Field(10, ge=1, description="Random BPDN/Dantzig instances")
    certificate_n: int = Field(16, ge=2)
    certificate_m: int = Field(32, ge=2)
    certificate_s: int = Field(3, ge=1)
    oracle_n: int = Field(64, ge=2, description="Two-ortho size for the oracle-vs-CRB check")
    oracle_s: int = Field(5, ge=1)
    oracle_sigma: float = Field(0.01, gt=0)
    oracle_trials: int = Field(2000, ge=1)
    oracle_tolerance: float = Field(0.05, gt=0, description="Allowed relative MSE deviation from the CRB")

    @model_validator(mode="after")
    def _check_sizes(self) -> "VerifyConfig":
        if self.lemma_max_s > self.lemma_n:
            raise ValueError("lemma_max_s must not exceed lemma_n")
        if self.certificate_s >= self.certificate_n:
            raise ValueError("certificate_s must be below certificate_n")
        return self
