"""Model registry and the fine-tuning loop.

Built-in base models are constructed deterministically from their spec;
fine-tuned models are persisted under their output id and never replace the
base they came from. Training regresses the cosine similarity of sentence
pairs onto provided scores (mean squared error on the cosine), with linear
learning-rate warmup, and logs validation correlation before training,
every ``eval_every`` steps, and at the end.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .encoder import HashedBagEncoder

BUILTIN_MODELS: dict[str, dict] = {
    "bag-small-v1": {"dim": 256, "buckets": 4096, "seed": 7},
    "bag-mini-v1": {"dim": 64, "buckets": 1024, "seed": 11},
}

# Tiny model, large steps: sized so that even a couple of optimizer steps
# (100 examples at batch 128 over 2 epochs, throttled by warmup) measurably
# move the cosine.
LEARNING_RATE = 2.0
VALIDATION_FRACTION = 0.2


class UnknownModelError(KeyError):
    pass


class RegistryError(ValueError):
    pass


@dataclass
class Hyperparameters:
    batch_size: int = 128
    epochs: int = 2
    warmup_steps: int = 100
    eval_every: int = 500


@dataclass
class TrainingExample:
    query_sentence: str
    answer_sentence: str
    score: float


class ModelRegistry:
    """Disk-backed registry; at most one fine-tune job runs at a time."""

    def __init__(self, models_dir: str | Path):
        # Created lazily on the first save, so merely importing the app does
        # not touch the filesystem.
        self.models_dir = Path(models_dir)
        self._cache: dict[str, HashedBagEncoder] = {}
        self._train_lock = threading.Lock()

    # -- lookup ---------------------------------------------------------------

    def list_models(self) -> list[dict]:
        out = [{"model_id": model_id, "dim": spec["dim"]}
               for model_id, spec in sorted(BUILTIN_MODELS.items())]
        for path in sorted(self.models_dir.glob("*.json")):
            spec = json.loads(path.read_text(encoding="utf-8"))
            out.append({"model_id": path.stem, "dim": spec["dim"]})
        return out

    def get(self, model_id: str) -> HashedBagEncoder:
        if model_id in self._cache:
            return self._cache[model_id]
        if model_id in BUILTIN_MODELS:
            model = HashedBagEncoder(**BUILTIN_MODELS[model_id])
        else:
            spec_path = self.models_dir / f"{model_id}.json"
            weights_path = self.models_dir / f"{model_id}.pt"
            if not spec_path.exists() or not weights_path.exists():
                raise UnknownModelError(model_id)
            spec = json.loads(spec_path.read_text(encoding="utf-8"))
            model = HashedBagEncoder(**spec)
            model.load_state_dict(torch.load(weights_path, weights_only=True))
        model.eval()
        self._cache[model_id] = model
        return model

    def _save(self, model_id: str, model: HashedBagEncoder) -> None:
        self.models_dir.mkdir(parents=True, exist_ok=True)
        (self.models_dir / f"{model_id}.json").write_text(
            json.dumps(model.spec(), sort_keys=True), encoding="utf-8")
        torch.save(model.state_dict(), self.models_dir / f"{model_id}.pt")
        self._cache[model_id] = model

    # -- fine-tuning ----------------------------------------------------------

    def finetune(self, model_id: str, examples: list[TrainingExample],
                 hp: Hyperparameters, output_model_id: str) -> list[dict]:
        """Train a copy of the base model and persist it; returns the log."""
        if not examples:
            raise RegistryError("at least one training example is required")
        for i, ex in enumerate(examples):
            if not 0.0 <= ex.score <= 1.0:
                raise RegistryError(f"example {i}: score {ex.score} outside [0, 1]")
        if output_model_id == model_id or output_model_id in BUILTIN_MODELS:
            raise RegistryError(
                "output_model_id must differ from every base model id")
        if min(hp.batch_size, hp.epochs) < 1 or hp.warmup_steps < 0 or hp.eval_every < 1:
            raise RegistryError("invalid hyperparameters")

        with self._train_lock:
            base = self.get(model_id)
            model = HashedBagEncoder(**base.spec())
            model.load_state_dict(base.state_dict())
            return self._train(model, examples, hp, output_model_id)

    @staticmethod
    def _split(examples: list[TrainingExample]
               ) -> tuple[list[TrainingExample], list[TrainingExample]]:
        """Deterministic validation carve-out, stratified by score so both
        halves see the full label range (correlation on a one-sided sample
        would be meaningless)."""
        if len(examples) < 2:
            return list(examples), []
        ranked = sorted(range(len(examples)), key=lambda i: (examples[i].score, i))
        stride = max(2, round(1.0 / VALIDATION_FRACTION))
        val_idx = set(ranked[stride // 2::stride])
        train = [ex for i, ex in enumerate(examples) if i not in val_idx]
        val = [ex for i, ex in enumerate(examples) if i in val_idx]
        return (train, val) if train else (list(examples), val)

    def _train(self, model: HashedBagEncoder, examples: list[TrainingExample],
               hp: Hyperparameters, output_model_id: str) -> list[dict]:
        train, val = self._split(examples)

        log: list[dict] = [{
            "event": "config", "batch_size": hp.batch_size, "epochs": hp.epochs,
            "warmup_steps": hp.warmup_steps, "eval_every": hp.eval_every,
            "train_examples": len(train), "validation_examples": len(val),
            "loss": "mean squared error on cosine similarity",
        }]

        def evaluate(step: int) -> None:
            if val:
                log.append({"event": "eval", "step": step,
                            "validation_correlation": self._correlation(model, val)})

        optimizer = torch.optim.AdamW(model.parameters(), lr=LEARNING_RATE)
        mse = nn.MSELoss()
        step = 0
        evaluate(step)
        model.train()
        for _ in range(hp.epochs):
            for start in range(0, len(train), hp.batch_size):
                batch = train[start:start + hp.batch_size]
                step += 1
                scale = min(1.0, step / hp.warmup_steps) if hp.warmup_steps else 1.0
                for group in optimizer.param_groups:
                    group["lr"] = LEARNING_RATE * scale
                optimizer.zero_grad()
                queries = model([ex.query_sentence for ex in batch])
                answers = model([ex.answer_sentence for ex in batch])
                predicted = (queries * answers).sum(dim=1)
                target = torch.tensor([ex.score for ex in batch],
                                      dtype=torch.float32)
                loss = mse(predicted, target)
                loss.backward()
                optimizer.step()
                log.append({"event": "step", "step": step,
                            "loss": float(loss.item())})
                if step % hp.eval_every == 0:
                    evaluate(step)
        model.eval()
        evaluate(step)
        self._save(output_model_id, model)
        log.append({"event": "done", "steps": step,
                    "output_model_id": output_model_id})
        return log

    @staticmethod
    def _correlation(model: HashedBagEncoder, examples: list[TrainingExample]) -> float:
        """Pearson correlation between predicted cosine and target scores;
        0.0 when either side is constant."""
        with torch.no_grad():
            queries = model([ex.query_sentence for ex in examples])
            answers = model([ex.answer_sentence for ex in examples])
            predicted = (queries * answers).sum(dim=1).double()
        target = torch.tensor([ex.score for ex in examples], dtype=torch.float64)
        p = predicted - predicted.mean()
        t = target - target.mean()
        denom = float(p.norm()) * float(t.norm())
        if denom == 0.0 or math.isnan(denom):
            return 0.0
        return float((p @ t) / denom)
