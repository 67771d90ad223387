"""
The optimization loop: joint cross-entropy over both domains, DC-MMD
alignment, CLUB disentanglement with its inner fitting loop, and
reconstruction, with scheduled evaluation and checkpointing.
"""
import contextlib
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from config.core.exceptions import DataFormatError, TrainingAborted
from evaluation.services.evaluator import EvalReport, NetworkScorer, evaluate
from interactions.services.sampling import sample_training_negatives
from interactions.services.types import DOMAINS, Domain, DomainDataset
from recsys.alignment import dc_mmd_loss
from recsys.disentangle import club_mi_loss, reconstruction_loss, total_mi_loss, variational_log_likelihood
from recsys.encoders import build_graphs, encode_full
from recsys.fusion import bce_loss, domain_ce_sum, score_pairs
from recsys.network import init_parameters
from training.config import TrainingConfig
from .checkpoints import save_checkpoint
from .objective import StepRecord, TrainLog, total_loss

logger = logging.getLogger(__name__)

# CLUB shuffles users to draw negative pairs
MIN_MI_USERS = 2


@contextlib.contextmanager
def frozen(parameters):
    """Temporarily excludes `parameters` from autograd."""
    parameters = list(parameters)
    previous = [p.requires_grad for p in parameters]
    for p in parameters:
        p.requires_grad_(False)
    try:
        yield
    finally:
        for p, flag in zip(parameters, previous):
            p.requires_grad_(flag)


@dataclass
class FitResult:
    config: TrainingConfig
    network: torch.nn.Module
    log: TrainLog
    best_report: EvalReport
    best_epoch: int
    directions: dict = field(default_factory=dict)


class Trainer:
    """
    Owns the parameters, optimizers and random streams of one training run.

    Two Adam optimizers with the same learning rate are used: one over the
    variational heads (inner loop), one over everything else. Given the
    config seed the whole run is deterministic.
    """
    def __init__(self, dataset: DomainDataset, candidates: dict, config: TrainingConfig, *, recorder=None):
        self.dataset = dataset
        self.candidates = candidates
        self.config = config
        self.recorder = recorder
        self.flags = config.flags
        self.kernel = config.kernel
        self.graphs = build_graphs(dataset)
        self.generator = torch.Generator().manual_seed(config.seed)
        self.rng = np.random.default_rng([config.seed, 2])
        self.network = init_parameters(dataset, config, self.generator)
        self.optimizer = torch.optim.Adam(self.network.main_parameters(), lr=config.learning_rate)
        self.variational_optimizer = torch.optim.Adam(self.network.variational_parameters(), lr=config.learning_rate)
        self.log = TrainLog()
        self.step_count = 0
        self.last_checkpoint = None
        self.best_report = None
        self.best_epoch = None

    @property
    def steps_per_epoch(self) -> int:
        largest = max(len(self.dataset.train(domain)) for domain in DOMAINS)
        return max(1, math.ceil(largest / self.config.batch_size))

    def train_step(self, positives: dict, epoch: int = 0) -> StepRecord:
        """
        Executes one update in logical steps:
        1. Label the positives of both domains and draw training negatives
        2. Encode both domains and gather the batch users
        3. Fit the variational heads on detached representations
        4. Compute the total loss with the variational heads frozen
        5. One Adam step on every other parameter
        """
        labelled = {
            domain: sample_training_negatives(self.dataset, domain, positives[domain],
                                              self.config.negative_ratio, self.rng)
            for domain in DOMAINS
        }
        users = np.unique(np.concatenate([np.asarray(positives[d])[:, 0] for d in DOMAINS]))
        full = encode_full(self.network, self.graphs)
        batch = full.select(users)

        variational_loglik = self._fit_variational(batch)
        with frozen(self.network.variational_parameters()):
            terms, estimates = self._loss_terms(full, batch, labelled, users)
            total = total_loss(terms['ce'], terms['dcmmd'], terms['mi'], terms['rec'], self.config.alpha)
            if not torch.isfinite(total):
                raise TrainingAborted('total loss is not finite', step=self.step_count, checkpoint=self.last_checkpoint)
            self.optimizer.zero_grad()
            total.backward()
            if self.config.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(self.network.main_parameters(), self.config.grad_clip)
            self.optimizer.step()

        record = StepRecord.from_terms(
            epoch=epoch, step=self.step_count, alpha=self.config.alpha,
            variational_loglik=variational_loglik, **terms, **estimates,
        )
        self.step_count += 1
        self.log.steps.append(record)
        if self.recorder is not None:
            self.recorder.on_step(record)
        return record

    def _fit_variational(self, batch) -> float:
        if not self.flags.mutual_information or self.config.club_inner_steps == 0:
            return 0.0
        if len(batch.users) < MIN_MI_USERS:
            return 0.0
        detached = {d: (batch.h_t[d].detach(), batch.h_s[d].detach()) for d in DOMAINS}
        for _ in range(self.config.club_inner_steps):
            self.variational_optimizer.zero_grad()
            loglik = sum(
                variational_log_likelihood(self.network.variational[d.value], *detached[d], index=self.step_count)
                for d in DOMAINS
            )
            (-loglik).backward()
            self.variational_optimizer.step()
        return float(loglik)

    def _loss_terms(self, full, batch, labelled: dict, users) -> tuple[dict, dict]:
        config = self.config
        ce = {
            domain: bce_loss(
                score_pairs(full, domain, rows[:, 0], rows[:, 1], attention=self.flags.attention),
                torch.from_numpy(rows[:, 2].copy()),
            )
            for domain, rows in labelled.items()
        }
        terms = {
            'ce': domain_ce_sum(ce[Domain.A], ce[Domain.B]),
            'dcmmd': dc_mmd_loss(batch, self.network.projectors, self.kernel,
                                 symmetric=config.symmetric_dcmmd, grl_scale=config.grl_scale),
        }
        zero = terms['ce'].new_zeros(())
        terms['mi'], terms['rec'] = zero, zero
        estimates = {}
        if self.flags.mutual_information and len(users) < MIN_MI_USERS:
            logger.debug('Step %d: %d batch user(s), skipping the mutual information term', self.step_count, len(users))
        elif self.flags.mutual_information:
            per_domain = {
                d: club_mi_loss(self.network.variational[d.value], batch.h_t[d], batch.h_s[d], generator=self.generator)
                for d in DOMAINS
            }
            terms['mi'] = total_mi_loss(per_domain[Domain.A], per_domain[Domain.B], config.beta_a, config.beta_b)
            estimates = {'mi_estimate_a': float(per_domain[Domain.A]), 'mi_estimate_b': float(per_domain[Domain.B])}
        if self.flags.reconstruction:
            raw = self.network.raw_user_rows(users)
            terms['rec'] = reconstruction_loss(self.network.reconstructors, batch, raw, config.gamma_a, config.gamma_b)
        return terms, estimates

    def _positives(self, domain: Domain, order: np.ndarray, step: int) -> np.ndarray:
        train = self.dataset.train(domain)
        if len(train) == 0:
            raise DataFormatError(f'domain {domain.value} has no train interactions')
        window = np.arange(step * self.config.batch_size, (step + 1) * self.config.batch_size) % len(train)
        return train[order[window]]

    def evaluate(self, epoch: int = None) -> EvalReport:
        scorer = NetworkScorer(self.network, self.graphs, attention=self.flags.attention)
        return evaluate(
            scorer, self.candidates,
            k=self.config.top_k,
            batch_users=self.config.eval_batch_users,
            num_negatives=self.config.num_negatives,
            config_hash=self.config.hash,
            seed=self.config.seed,
            epoch=epoch,
        )

    def _save(self, name: str, epoch: int):
        if self.recorder is None:
            return None
        path = save_checkpoint(
            self.network, self.recorder.checkpoint_dir(name),
            config_hash=self.config.hash, epoch=epoch,
            optimizers={'main': self.optimizer, 'variational': self.variational_optimizer},
        )
        if name == 'last':
            self.last_checkpoint = path
        return path

    def _evaluate_and_checkpoint(self, epoch: int):
        report = self.evaluate(epoch)
        self.log.evaluations.append(report)
        if self.recorder is not None:
            self.recorder.on_eval(report)
        target = report.metrics(self.config.target_domain)
        if self.best_report is None or target.hr > self.best_report.metrics(self.config.target_domain).hr:
            self.best_report, self.best_epoch = report, epoch
            self._save('best', epoch)
        self._save('last', epoch)
        logger.info('Epoch %d: target %s HR@%d %.2f NDCG@%d %.2f', epoch, self.config.target_domain,
                    report.k, target.hr, report.k, target.ndcg)

    def fit(self) -> FitResult:
        """
        Runs the full schedule:
        1. Each epoch, shuffle both domains' train rows with the run's generator
        2. Run steps_per_epoch train steps; the smaller domain wraps around
        3. Evaluate every eval_every epochs and after the last epoch
        4. Keep the best checkpoint by target-domain HR@K
        """
        config = self.config
        steps = self.steps_per_epoch
        logger.info('Training %s (%s) for %d epochs x %d steps', config.run_key, config.ablation, config.epochs, steps)
        for epoch in range(1, config.epochs + 1):
            started = time.perf_counter()
            order = {d: self.rng.permutation(len(self.dataset.train(d))) for d in DOMAINS}
            for step in range(steps):
                self.train_step({d: self._positives(d, order[d], step) for d in DOMAINS}, epoch=epoch)
            means = self.log.epoch_means(epoch)
            logger.info('Epoch %d: ce %.4f dcmmd %.4f mi %.6f rec %.4f total %.4f', epoch,
                        means['ce'], means['dcmmd'], means['mi'], means['rec'], means['total'])
            if epoch % config.eval_every == 0 or epoch == config.epochs:
                self._evaluate_and_checkpoint(epoch)
            if self.recorder is not None:
                self.recorder.on_timing(epoch, time.perf_counter() - started)
        return FitResult(config=config, network=self.network, log=self.log,
                         best_report=self.best_report, best_epoch=self.best_epoch)


def _combine_directions(results: dict, config: TrainingConfig) -> FitResult:
    """Reports each domain from the run that targeted it."""
    target = Domain(config.target_domain)
    log = TrainLog()
    for domain in DOMAINS:
        log.extend(results[domain].log)
    report = EvalReport(
        k=config.top_k,
        domains={d: results[d].best_report.metrics(d) for d in DOMAINS},
        config_hash=config.hash,
        seed=config.seed,
    )
    return FitResult(config=config, network=results[target].network, log=log, best_report=report,
                     best_epoch=results[target].best_epoch, directions=results)


def fit(dataset: DomainDataset, candidates: dict, config: TrainingConfig, recorder=None) -> FitResult:
    """
    Trains once and evaluates both domains, or, with retrain_per_direction,
    trains once per target domain.
    """
    if not config.retrain_per_direction:
        return Trainer(dataset, candidates, config, recorder=recorder).fit()
    results = {}
    for domain in DOMAINS:
        scoped = recorder.scoped(domain) if recorder is not None else None
        results[domain] = Trainer(dataset, candidates, config.replace(target_domain=domain.value),
                                  recorder=scoped).fit()
    return _combine_directions(results, config)
