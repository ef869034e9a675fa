"""HTTP surface: POST /encode, POST /finetune, GET /health (JSON, UTF-8)."""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from .registry import (Hyperparameters, ModelRegistry, RegistryError,
                       TrainingExample, UnknownModelError)

ENV_MODELS_DIR = "EMBED_SERVICE_MODELS_DIR"
DEFAULT_MODELS_DIR = "embed_service_models"


class EncodeRequest(BaseModel):
    model_id: str
    sentences: list[str]


class EncodeResponse(BaseModel):
    dim: int
    embeddings: list[list[float]]


class ExamplePayload(BaseModel):
    # Training files may carry extra bookkeeping fields (kind, polarity, agg);
    # only the sentence pair and its score matter here.
    model_config = ConfigDict(extra="ignore")

    query_sentence: str
    answer_sentence: str
    score: float


class HyperparametersPayload(BaseModel):
    batch_size: int = 128
    epochs: int = 2
    warmup_steps: int = 100
    eval_every: int = 500


class FinetuneRequest(BaseModel):
    model_id: str
    examples: list[ExamplePayload]
    hyperparameters: HyperparametersPayload = Field(
        default_factory=HyperparametersPayload)
    output_model_id: str


class FinetuneResponse(BaseModel):
    output_model_id: str
    log: list[dict]


def create_app(models_dir: str | Path | None = None) -> FastAPI:
    directory = Path(models_dir or os.environ.get(ENV_MODELS_DIR, DEFAULT_MODELS_DIR))
    registry = ModelRegistry(directory)
    app = FastAPI(title="embed-service")
    app.state.registry = registry

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "loaded_models": registry.list_models()}

    @app.post("/encode", response_model=EncodeResponse)
    def encode(request: EncodeRequest) -> EncodeResponse:
        try:
            model = registry.get(request.model_id)
        except UnknownModelError:
            raise HTTPException(status_code=404,
                                detail=f"unknown model {request.model_id!r}")
        vectors = model.encode(request.sentences)
        return EncodeResponse(dim=model.dim, embeddings=vectors.tolist())

    @app.post("/finetune", response_model=FinetuneResponse)
    def finetune(request: FinetuneRequest) -> FinetuneResponse:
        examples = [TrainingExample(e.query_sentence, e.answer_sentence, e.score)
                    for e in request.examples]
        hp = Hyperparameters(**request.hyperparameters.model_dump())
        try:
            log = registry.finetune(request.model_id, examples, hp,
                                    request.output_model_id)
        except UnknownModelError as exc:
            raise HTTPException(status_code=404, detail=f"unknown model {exc}")
        except RegistryError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return FinetuneResponse(output_model_id=request.output_model_id, log=log)

    return app


app = create_app()
