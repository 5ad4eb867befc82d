"""Local HTTP facade over the analysis pipeline.

One session per uploaded dataset: the pristine matrix is kept immutable,
realignment swaps in a new current matrix and a freshly scanned graph, and a
revision counter guards against edits issued from a stale view (optimistic
concurrency: a mutation carrying an out-of-date revision gets 409).  Reads
take the same per-session lock briefly so every response reflects one
consistent revision.

Export endpoints return the canonical serializers' bytes directly so a CLI
pipeline and a service download of the same artifact compare byte-identical.
"""

from __future__ import annotations

import itertools
import json
import threading
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .alignment_io import AlignmentError, AlignmentMatrix, from_rows, parse_alignment
from .contingency import all_pairs_scan
from .crf_model import CrfModel, EmptySelection, build_crf, rank_variants
from .demo import demo_rows, demo_shifted_rows
from .layout import compute_layout
from .metagraph import FilterSpec, Metagraph, SchemaViolation, UnknownEdge, build_graph
from .realign import detect_echoes, phi, realign_iterate

__all__ = ["create_app", "ApiError"]


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _bad_request(message: str) -> ApiError:
    return ApiError(400, "bad_request", message)


def _not_found(message: str) -> ApiError:
    return ApiError(404, "not_found", message)


class Session:
    def __init__(self, dataset_id: str, matrix: AlignmentMatrix):
        self.id = dataset_id
        self.pristine = matrix
        self.current = matrix
        self.graph = build_graph(all_pairs_scan(matrix))
        self.models: dict[str, CrfModel] = {}
        self.latest_model_id: Optional[str] = None
        self.revision = 0
        self.lock = threading.RLock()


class Store:
    def __init__(self, max_cells: Optional[int] = None):
        self.max_cells = max_cells
        self.sessions: dict[str, Session] = {}
        self.model_owner: dict[str, Session] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def new_session(self, matrix: AlignmentMatrix) -> Session:
        if self.max_cells is not None and matrix.n * matrix.L > self.max_cells:
            raise ApiError(400, "dataset_too_large",
                           f"dataset exceeds the {self.max_cells}-cell limit")
        with self._lock:
            session = Session(f"d{next(self._ids)}", matrix)
            self.sessions[session.id] = session
        return session

    def session(self, dataset_id: str) -> Session:
        try:
            return self.sessions[dataset_id]
        except KeyError:
            raise _not_found(f"unknown dataset {dataset_id!r}") from None

    def register_model(self, session: Session, model: CrfModel) -> str:
        with self._lock:
            model_id = f"m{next(self._ids)}"
        session.models[model_id] = model
        session.latest_model_id = model_id
        self.model_owner[model_id] = session
        return model_id

    def model(self, model_id: str) -> CrfModel:
        session = self.model_owner.get(model_id)
        if session is None:
            raise _not_found(f"unknown model {model_id!r}")
        return session.models[model_id]


def _filter_from_query(request: Request) -> FilterSpec:
    q = request.query_params

    def fval(name: str, default: float) -> float:
        raw = q.get(name)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise _bad_request(f"{name} must be a number, got {raw!r}") from None

    try:
        return FilterSpec(min_abs_std_residual=fval("min_z", 0.0),
                          max_p=fval("max_p", 1.0),
                          min_abs_raw=fval("min_raw", 0.0),
                          sign=q.get("sign", "both"))
    except ValueError as exc:
        raise _bad_request(str(exc)) from None


def _require(body: dict, key: str):
    if key not in body:
        raise _bad_request(f"missing field {key!r}")
    return body[key]


def _check_revision(session: Session, body: dict) -> None:
    rev = body.get("revision")
    if rev is not None and int(rev) != session.revision:
        raise ApiError(409, "stale_revision",
                       f"revision {rev} is stale (current {session.revision})")


def _matrix_from_body(body: dict) -> AlignmentMatrix:
    demo = body.get("demo")
    if demo is not None:
        if demo in ("hairpin", True):
            return from_rows(demo_rows())
        if demo == "shifted":
            return from_rows(demo_shifted_rows())
        raise _bad_request(f"unknown demo dataset {demo!r}")
    if "rows" in body:
        rows = body["rows"]
        if not isinstance(rows, list) or not all(isinstance(r, str) for r in rows):
            raise _bad_request("rows must be a list of strings")
        ids = body.get("row_ids")
        return from_rows(rows, row_ids=tuple(ids) if ids else None)
    if "text" in body:
        return parse_alignment(body["text"], fmt=body.get("format", "auto"))
    raise _bad_request("body must provide rows, text, or demo")


def create_app(max_cells: Optional[int] = None) -> FastAPI:
    app = FastAPI(title="covarnet", docs_url=None, redoc_url=None)
    store = Store(max_cells=max_cells)
    app.state.store = store
    # The viewer is served as static files from a different local port, so
    # the browser needs CORS consent; the service itself stays loopback-only.
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"],
                       expose_headers=["X-Revision"])

    @app.exception_handler(ApiError)
    async def _api_error(_request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"error": {"code": exc.code,
                                               "message": exc.message}})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": {"code": "bad_request",
                                               "message": str(exc)}})

    async def _json_body(request: Request) -> dict:
        raw = await request.body()
        if not raw:
            return {}
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise _bad_request(f"body is not valid JSON: {exc}") from None
        if not isinstance(body, dict):
            raise _bad_request("body must be a JSON object")
        return body

    # --- datasets ---------------------------------------------------------

    @app.post("/datasets")
    async def create_dataset(request: Request):
        body = await _json_body(request)
        try:
            matrix = _matrix_from_body(body)
        except AlignmentError as exc:
            raise _bad_request(str(exc)) from None
        session = store.new_session(matrix)
        return {"id": session.id, "revision": session.revision,
                "n": matrix.n, "L": matrix.L,
                "alphabet": "".join(matrix.alphabet.symbols),
                "gap": matrix.alphabet.gap}

    @app.get("/datasets/{dataset_id}/graph")
    async def get_graph(dataset_id: str, request: Request):
        session = store.session(dataset_id)
        spec = _filter_from_query(request)
        with session.lock:
            # The query filter becomes the session's view state so later
            # exports and realignment reflect what the analyst last saw.
            session.graph.apply_filter(spec)
            doc = session.graph.view_document(spec)
            zmax = 0.0
            rmax = 0.0
            E = len(session.graph.edges)
            if E:
                idx = np.arange(E)
                zmax = float(np.abs(session.graph.edges.std_residual(idx)).max())
                rmax = float(np.abs(session.graph.edges.raw_residual(idx)).max())
            return {"revision": session.revision,
                    "stats": {"max_abs_z": zmax, "max_abs_raw": rmax,
                              "edge_total": E},
                    "graph": doc}

    @app.post("/datasets/{dataset_id}/edges/{key_action}")
    async def edit_edge(dataset_id: str, key_action: str, request: Request):
        session = store.session(dataset_id)
        if ":" not in key_action:
            raise _bad_request("expected edges/{key}:{pin|remove|reset}")
        key, _, action = key_action.rpartition(":")
        body = await _json_body(request)
        with session.lock:
            _check_revision(session, body)
            try:
                session.graph.edit_edge(key, action)
            except UnknownEdge as exc:
                raise _not_found(str(exc.args[0] if exc.args else exc)) from None
            except ValueError as exc:
                raise _bad_request(str(exc)) from None
            session.revision += 1
            return {"revision": session.revision, "key": key,
                    "state": session.graph.edge_state(key)}

    @app.post("/datasets/{dataset_id}/model")
    async def build_model(dataset_id: str, request: Request):
        session = store.session(dataset_id)
        body = await _json_body(request)
        selection = body.get("selection", "visible")
        kappa = body.get("kappa", 0.5)
        with session.lock:
            _check_revision(session, body)
            try:
                model = build_crf(session.graph, selection=selection,
                                  kappa=float(kappa))
            except (EmptySelection, SchemaViolation, ValueError) as exc:
                raise _bad_request(str(exc)) from None
            model_id = store.register_model(session, model)
            session.revision += 1
            return {"revision": session.revision, "model_id": model_id,
                    "model": model.to_document()}

    @app.post("/models/{model_id}/score")
    async def score(model_id: str, request: Request):
        model = store.model(model_id)
        body = await _json_body(request)
        sequences = _require(body, "sequences")
        if not isinstance(sequences, list) or not all(isinstance(s, str) for s in sequences):
            raise _bad_request("sequences must be a list of strings")
        try:
            results = rank_variants(model, sequences, ids=body.get("ids"),
                                    reference=body.get("reference"))
        except (KeyError, ValueError) as exc:
            raise _bad_request(str(exc)) from None
        doc = {"results": results}
        return Response(content=json.dumps(doc, sort_keys=True, indent=2) + "\n",
                        media_type="application/json")

    @app.post("/datasets/{dataset_id}/realign")
    async def realign(dataset_id: str, request: Request):
        session = store.session(dataset_id)
        body = await _json_body(request)
        s_max = int(body.get("s_max", 3))
        max_rounds = int(body.get("max_rounds", 5))
        manual = body.get("manual_shifts")
        with session.lock:
            _check_revision(session, body)
            try:
                result = realign_iterate(session.current,
                                         spec=session.graph.filter_spec,
                                         s_max=s_max, max_rounds=max_rounds,
                                         manual_shifts=manual)
            except (ValueError, IndexError) as exc:
                raise _bad_request(str(exc)) from None
            # Realignment replaces the edge universe: states and edit log
            # refer to the old scan, so the graph restarts pristine.
            result.graph.apply_filter(session.graph.filter_spec)
            session.current = result.matrix
            session.graph = result.graph
            session.revision += 1
            return Response(
                content=json.dumps(result.to_document(), sort_keys=True,
                                   indent=2) + "\n",
                media_type="application/json",
                headers={"X-Revision": str(session.revision)})

    @app.get("/datasets/{dataset_id}/echoes")
    async def get_echoes(dataset_id: str, request: Request):
        session = store.session(dataset_id)
        spec = _filter_from_query(request)
        try:
            s_max = int(request.query_params.get("s_max", 3))
        except ValueError:
            raise _bad_request("s_max must be an integer") from None
        with session.lock:
            session.graph.apply_filter(spec)
            try:
                groups = detect_echoes(session.graph, spec=spec, s_max=s_max)
            except ValueError as exc:
                raise _bad_request(str(exc)) from None
            return {"revision": session.revision,
                    "phi": phi(session.graph, spec),
                    "groups": [g.to_document() for g in groups]}

    @app.get("/datasets/{dataset_id}/scene")
    async def get_scene(dataset_id: str, request: Request):
        session = store.session(dataset_id)
        spec = _filter_from_query(request)
        with session.lock:
            session.graph.apply_filter(spec)
            scene = compute_layout(session.graph, spec)
            return Response(content=scene.to_json(),
                            media_type="application/json",
                            headers={"X-Revision": str(session.revision)})

    @app.get("/datasets/{dataset_id}/export/{artifact}")
    async def export(dataset_id: str, artifact: str):
        session = store.session(dataset_id)
        with session.lock:
            if artifact == "edges.csv":
                return Response(content=session.graph.to_csv(),
                                media_type="text/csv",
                                headers={"X-Revision": str(session.revision)})
            if artifact == "graph.json":
                return Response(content=session.graph.to_json(),
                                media_type="application/json",
                                headers={"X-Revision": str(session.revision)})
            if artifact == "model.json":
                if session.latest_model_id is None:
                    raise _not_found("no model built for this dataset yet")
                model = session.models[session.latest_model_id]
                return Response(content=model.to_json(),
                                media_type="application/json",
                                headers={"X-Revision": str(session.revision)})
        raise _not_found(f"unknown export artifact {artifact!r}")

    return app
