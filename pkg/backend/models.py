"""
Wire formats: pydantic models for everything the engine reads or writes as JSON.
"""
import json
from fractions import Fraction
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from config import ResourceCaps
from errors import ParseError
from localalg import MembershipCertificate, MonomialOrder, StandardBasis
from polyring import Poly


def dump_json(model: BaseModel) -> str:
    """Canonical JSON: sorted keys, no trailing whitespace."""
    return json.dumps(model.model_dump(mode="json"), sort_keys=True, ensure_ascii=False)


def _check_rational(value: str) -> str:
    try:
        Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"{value!r} is not an exact rational")
    return value


class TermModel(BaseModel):
    exp: List[int]
    coef: str

    @field_validator("coef")
    @classmethod
    def coef_is_rational(cls, v: str) -> str:
        return _check_rational(v)


class PolyModel(BaseModel):
    nvars: int = Field(ge=0)
    terms: List[TermModel] = []

    @classmethod
    def from_poly(cls, p: Poly) -> "PolyModel":
        return cls(nvars=p.nvars, terms=[TermModel(exp=list(e), coef=str(c)) for e, c in p.items()])

    def to_poly(self) -> Poly:
        try:
            return Poly(self.nvars, {tuple(t.exp): Fraction(t.coef) for t in self.terms})
        except ValueError as e:
            raise ParseError(f"Bad polynomial record: {e}")


class BasisModel(BaseModel):
    order: str = "local-ds"
    generators: List[PolyModel]
    completed: bool = True

    @classmethod
    def from_basis(cls, basis: StandardBasis) -> "BasisModel":
        return cls(order=basis.order.name, generators=[PolyModel.from_poly(g) for g in basis.generators],
                   completed=basis.completed)

    def to_basis(self) -> StandardBasis:
        gens = tuple(g.to_poly() for g in self.generators)
        return StandardBasis(gens, MonomialOrder.from_name(self.order), self.completed)


class CertificateModel(BaseModel):
    unit: PolyModel
    cofactors: List[PolyModel]
    target: PolyModel
    generators: List[PolyModel]

    @classmethod
    def from_certificate(cls, cert: MembershipCertificate) -> "CertificateModel":
        return cls(
            unit=PolyModel.from_poly(cert.unit),
            cofactors=[PolyModel.from_poly(a) for a in cert.cofactors],
            target=PolyModel.from_poly(cert.target),
            generators=[PolyModel.from_poly(g) for g in cert.generators],
        )

    def to_certificate(self) -> MembershipCertificate:
        return MembershipCertificate(
            self.unit.to_poly(),
            tuple(a.to_poly() for a in self.cofactors),
            self.target.to_poly(),
            tuple(g.to_poly() for g in self.generators),
        )


class TraceNodeModel(BaseModel):
    id: int = Field(ge=0)
    kind: Literal["Pre", "P1", "P2", "Axiom"]
    inputs: List[int] = []
    output: PolyModel
    order: str
    variables: Optional[List[int]] = None
    r: Optional[int] = None
    certificate: Optional[CertificateModel] = None
    combination: Optional[List[str]] = None
    note: str = ""

    @field_validator("order")
    @classmethod
    def order_is_rational(cls, v: str) -> str:
        return _check_rational(v)


class TraceModel(BaseModel):
    nvars: int = Field(ge=1)
    premultipliers: List[PolyModel] = []
    nodes: List[TraceNodeModel] = []


class ResolutionModel(BaseModel):
    h: List[PolyModel]
    mu: List[int]
    lambdas: List[int]
    gamma: List[PolyModel]
    witnesses: List[CertificateModel]


class JobSpec(BaseModel):
    """One CLI invocation after flag and environment resolution."""
    command: Literal["mult", "jacobian", "nullstellensatz", "resolve", "run", "bound", "verify-trace",
                     "example-section8"]
    polys: Optional[str] = None
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    target: Optional[str] = None
    n: Optional[int] = Field(None, ge=1)
    nu: Optional[int] = Field(None, ge=1)
    achieved: Optional[str] = None
    seed: int = 0
    caps: ResourceCaps = ResourceCaps()
    json_output: bool = False

    @model_validator(mode="after")
    def command_fields_present(self) -> "JobSpec":
        needs_system = {"mult", "jacobian", "nullstellensatz", "resolve", "run"}
        if self.command in needs_system and not (self.polys or self.input_path):
            raise ValueError(f"{self.command} needs --polys or --in")
        if self.command == "nullstellensatz" and not self.target:
            raise ValueError("nullstellensatz needs --target")
        if self.command == "verify-trace" and not self.input_path:
            raise ValueError("verify-trace needs --in")
        if self.command == "bound" and (self.n is None or self.nu is None):
            raise ValueError("bound needs --n and --nu")
        if self.achieved is not None:
            _check_rational(self.achieved)
        return self


class BoundReportModel(BaseModel):
    n: int
    nu: int
    epsilon_formula: str
    epsilon_exact: bool
    mu_sequence: List[str]
    epsilon_sequence: List[str]
    achieved_order: Optional[str] = None
    verdict: Optional[Literal["pass", "fail"]] = None
    checks: dict = {}
