from dataclasses import asdict, dataclass, field


def total_loss(ce, dcmmd, mi, rec, alpha: float):
    """ce + alpha * dcmmd + mi + rec; the beta and gamma weights are already inside mi and rec."""
    return ce + alpha * dcmmd + mi + rec


@dataclass(frozen=True)
class StepRecord:
    """
    Loss terms of one train step. `mi` and `rec` are the weighted terms;
    `total` is recomputed from the components, never read off the graph.
    """
    epoch: int
    step: int
    ce: float
    dcmmd: float
    mi: float
    rec: float
    total: float
    mi_estimate_a: float = 0.0
    mi_estimate_b: float = 0.0
    variational_loglik: float = 0.0

    @classmethod
    def from_terms(cls, *, epoch, step, ce, dcmmd, mi, rec, alpha, **estimates) -> 'StepRecord':
        ce, dcmmd, mi, rec = float(ce), float(dcmmd), float(mi), float(rec)
        return cls(epoch=epoch, step=step, ce=ce, dcmmd=dcmmd, mi=mi, rec=rec,
                   total=total_loss(ce, dcmmd, mi, rec, alpha), **estimates)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainLog:
    steps: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)

    def epoch_means(self, epoch: int) -> dict:
        records = [r for r in self.steps if r.epoch == epoch]
        if not records:
            return {}
        keys = ('ce', 'dcmmd', 'mi', 'rec', 'total')
        return {key: sum(getattr(r, key) for r in records) / len(records) for key in keys}

    def extend(self, other: 'TrainLog'):
        self.steps.extend(other.steps)
        self.evaluations.extend(other.evaluations)
