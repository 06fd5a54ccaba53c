from typing import Dict

from pydantic import BaseModel, Field


class NormReport(BaseModel):
    kappa: float = Field(ge=0)
    l2: float = Field(ge=0)
    h1_semi: float = Field(ge=0)
    hk1: float = Field(ge=0)
    lp: Dict[int, float] = {}
