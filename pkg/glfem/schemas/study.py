from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from glfem.models.field import ComplexField
from glfem.schemas.eigen import UniquenessReport
from glfem.schemas.solver import MinimizeReport


class ConvergenceRecord(BaseModel):
    kappa: float
    n: int
    h: float
    method: str = "p1"

    # Errors against the reference, evaluated on the reference mesh
    err_l2: float = Field(ge=0)
    err_hk1: float = Field(ge=0)
    err_energy: float
    scaled_l2: float
    scaled_hk1: float
    scaled_energy: float

    order_l2: Optional[float] = None
    order_hk1: Optional[float] = None
    order_energy: Optional[float] = None

    bestapprox_hk1: Optional[float] = None
    bestapprox_l2: Optional[float] = None
    bestapprox_energy: Optional[float] = None

    # The discrete minimizer itself
    energy: float
    norm_hk1: float = Field(ge=0)
    converged: bool = True

    preasymptotic_flag: bool = False
    flagged: bool = False


class BoundsReport(BaseModel):
    kappa: float
    energy: float
    scaled_energy: float
    l2: float
    hk1_scaled: float
    h1_scaled: Optional[float] = None
    max_modulus: float
    energy_bound: float
    l2_bound: float = 2.0


class RateSummary(BaseModel):
    kappa: float
    method: str = "p1"
    order_l2: Optional[float] = None
    order_hk1: Optional[float] = None
    order_energy: Optional[float] = None
    bestapprox_order_hk1: Optional[float] = None
    levels_used: List[int] = []
    hk1_ratio: Optional[float] = None
    energy_ratio: Optional[float] = None


class ReferenceSolution(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    report: MinimizeReport
    uniqueness: Optional[UniquenessReport] = None
    warnings: List[str] = []

    @property
    def field(self) -> ComplexField:
        return self.report.field


class ConvergenceStudy(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    reference: ReferenceSolution
    records: List[ConvergenceRecord]
    bounds: List[BoundsReport] = []
    rates: Optional[RateSummary] = None
    fields: List[ComplexField] = []

    @property
    def converged(self) -> bool:
        return self.reference.report.converged and all(r.converged for r in self.records)


class LodStudy(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    reference: ReferenceSolution
    lod_records: List[ConvergenceRecord]
    p1_records: List[ConvergenceRecord] = []
    lod_rates: Optional[RateSummary] = None
    p1_rates: Optional[RateSummary] = None
    decomposition_residuals: List[float] = []

    @property
    def records(self) -> List[ConvergenceRecord]:
        return self.lod_records + self.p1_records

    @property
    def converged(self) -> bool:
        return self.reference.report.converged and all(r.converged for r in self.records)
