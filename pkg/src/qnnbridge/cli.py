"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 domain error, 3 reproduction failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import CircuitDag, CircuitError, ParameterStore, counts, parse_observable
from .encoders import KINDS, EncodingConfig, verify_encoding_equivalence
from .export import (DIALECTS, ExportError, circuit_from_dict, circuit_to_dict, export_bundle,
                     export_dialect, export_qasm, import_bundle, import_dialect, parse_qasm,
                     roundtrip_fidelity)
from .gradients import Strategy, gradient, noise_budget
from .hal import ExecutionManager, JobRequest, ScoreWeights, load_registry, score_breakdown
from .reproduce import CHECKS, FIXTURES, load_tolerances, run
from .simulator import ShotCounts
from .training import QuantumLayer, TrainConfig, load_iris, load_mnist4, load_wine, train
from .transpiler import BUILTIN_PROFILES, TargetProfile, load_profiles, transpile

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


# --- input helpers --------------------------------------------------------------------

def read_circuit(spec: str) -> CircuitDag:
    """A fixture name (``fixture:ibm_fez``), a ``.qasm`` file, a dialect
    document, or canonical circuit JSON."""
    if spec.startswith("fixture:"):
        name = spec.split(":", 1)[1]
        if name not in FIXTURES:
            raise UsageError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
        return FIXTURES[name]()
    text = Path(spec).read_text(encoding="utf-8")
    if spec.endswith(".qasm") or text.lstrip().startswith("OPENQASM"):
        return parse_qasm(text)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ExportError(f"{spec}: malformed JSON: {exc}") from None
    if "dialect" in doc:
        return import_dialect(text)[0]
    if "circuit" in doc:  # a whole bundle
        doc = doc["circuit"]
    return circuit_from_dict(doc)


def read_params(spec: str | None, circuit: CircuitDag | None = None) -> np.ndarray:
    """Comma-separated numbers or a JSON file with a list or ``{"values": [...]}``."""
    if spec is None:
        if circuit is not None and circuit.symbols:
            raise UsageError(f"circuit has {max(circuit.symbols) + 1} parameters; pass --params")
        return np.zeros(0)
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        doc = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(doc, dict):
            doc = doc["parameters"]["values"] if "parameters" in doc else doc["values"]
        return np.asarray(doc, dtype=float)
    try:
        return np.array([float(v) for v in spec.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"--params: expected numbers or a JSON file, got {spec!r}") from None


def read_profile(name: str) -> TargetProfile:
    if name in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[name]
    if Path(name).exists():
        profiles = load_profiles(name)
        if len(profiles) != 1:
            raise UsageError(f"{name} defines {len(profiles)} profiles; expected one")
        return next(iter(profiles.values()))
    raise UsageError(f"unknown profile {name!r}; built-in: {sorted(BUILTIN_PROFILES)}")


def read_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def load_dataset(name: str, seed: int, args):
    if name == "iris":
        return load_iris(seed)
    if name == "wine":
        return load_wine(seed)
    if name == "mnist4":
        if not (args.images and args.labels):
            raise UsageError("mnist4 needs --images and --labels IDX files")
        return load_mnist4(args.images, args.labels, seed=seed)
    raise UsageError(f"unknown dataset {name!r}")


def emit(args, payload: dict, text: str | None = None):
    if args.json or text is None:
        print(json.dumps(payload, indent=1, default=_jsonable))
    else:
        print(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, ShotCounts):
        return {"counts": x.counts, "shots": x.shots}
    raise TypeError(f"cannot serialize {type(x).__name__}")


def write_out(path: str | None, text: str):
    if path:
        Path(path).write_text(text, encoding="utf-8")


def _seed(args) -> int:
    if args.seed is None:
        print(f"# seed={DEFAULT_SEED} (default)", file=sys.stderr)
        return DEFAULT_SEED
    return args.seed


# --- commands ----------------------------------------------------------------------------

def cmd_encode(args) -> int:
    config = EncodingConfig(args.kind, args.axis, args.repetitions, None, args.epsilon)
    circuit = config.circuit(read_floats(args.x))
    payload = {"encoding": config.to_dict(), "circuit": circuit_to_dict(circuit),
               "counts": vars(counts(circuit))}
    if args.profile:
        r = verify_encoding_equivalence(config, read_floats(args.x), read_profile(args.profile))
        payload["equivalence"] = {"profile": args.profile, "passed": r.passed, "residual": r.residual}
    write_out(args.out, json.dumps(circuit_to_dict(circuit), indent=1))
    emit(args, payload)
    return 0


def cmd_grad(args) -> int:
    seed = _seed(args)
    circuit = read_circuit(args.circuit)
    theta = read_params(args.params, circuit)
    obs = parse_observable(args.observable)
    executor, budget = None, None
    if args.backend:
        from .hal import backend_executor
        backend = load_registry().get_backend(args.backend)
        executor = backend_executor(backend, args.shots, seed)
        cal = backend.calib
        if args.shots and (cal.eps_2q or cal.eps_ro or cal.eps_1q):
            b = noise_budget(args.shots, counts(circuit).n_2q, cal.eps_2q, circuit.n_qubits, cal.eps_ro)
            budget = vars(b)
    result = gradient(circuit, theta, obs, args.strategy, executor)
    payload = {"gradient": result.g, "evaluations": result.evaluations, "strategy": args.strategy,
               "backend": args.backend, "shots": args.shots, "seed": seed}
    if budget:
        payload["noise_budget"] = budget
    emit(args, payload)
    return 0


def cmd_transpile(args) -> int:
    circuit = read_circuit(args.circuit)
    if args.params:
        circuit = circuit.bind(read_params(args.params))
    compiled = transpile(circuit, read_profile(args.profile), verify_flag=not args.no_verify,
                         seed=args.seed or 0)
    doc = circuit_to_dict(compiled.circuit)
    write_out(args.out, json.dumps(doc, indent=1))
    rep = compiled.report
    payload = {"profile": args.profile, "passes": list(rep.passes), "swap_count": rep.swap_count,
               "verification_residual": rep.verification_residual, "layout": list(compiled.layout),
               "counts": vars(counts(compiled.circuit))}
    if not args.out:
        payload["circuit"] = doc
    emit(args, payload)
    return 0


def cmd_score(args) -> int:
    circuit = read_circuit(args.circuit)
    weights = ScoreWeights.parse(args.weights)
    registry = load_registry(args.registry)
    rows = []
    for b in registry.fitting(circuit.n_qubits):
        s = score_breakdown(b, circuit, weights)
        rows.append({"backend": b.name, "score": s.score, "fidelity": s.fidelity,
                     "connectivity": s.connectivity, "queue_hours": s.queue_norm,
                     "swaps": s.swap_estimate, "n_qubits": b.n_qubits})
    if not rows:
        raise CircuitError(f"no backend can host {circuit.n_qubits} qubits")
    rows.sort(key=lambda r: (-r["score"], r["n_qubits"], r["backend"]))
    text = "\n".join(f"{i + 1:2d}. {r['backend']:<24} {r['score']:8.4f}  fid={r['fidelity']:.4f} "
                     f"conn={r['connectivity']:.2f} queue={r['queue_hours']:.2f}h swaps={r['swaps']}"
                     for i, r in enumerate(rows))
    emit(args, {"weights": vars(weights), "ranking": rows}, text)
    return 0


def cmd_submit(args) -> int:
    seed = _seed(args)
    circuit = read_circuit(args.circuit)
    circuit = circuit.bind(read_params(args.params, circuit))
    obs = parse_observable(args.observable) if args.observable else None
    with ExecutionManager() as manager:
        job = manager.run_sync(JobRequest(circuit, args.backend, obs, args.shots, seed))
    payload = {"id": job.id, "status": job.status.value, "backend": args.backend,
               "result": job.result, "error": job.error, "swap_count": job.swap_count, "seed": seed}
    emit(args, payload)
    return 0 if job.status.value == "Done" else 2


TRAIN_DEFAULTS = {"qubits": 4, "layers": 4, "epochs": 200, "batch_size": 16, "lr": 0.01,
                  "init_scale": 1.0, "strategy": "adjoint"}


def train_settings(args) -> dict:
    """Defaults, then the --config file, then explicit flags."""
    settings = dict(TRAIN_DEFAULTS)
    if args.config:
        extra = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(extra) - set(settings) - {"seed", "dataset"}
        if unknown:
            raise UsageError(f"unknown training settings in {args.config}: {sorted(unknown)}")
        if args.seed is None and "seed" in extra:
            args.seed = int(extra.pop("seed"))
        args.dataset = args.dataset or extra.pop("dataset", None)
        extra.pop("seed", None)
        extra.pop("dataset", None)
        settings.update(extra)
    args.dataset = args.dataset or "iris"
    for key in TRAIN_DEFAULTS:
        if getattr(args, key) is not None:
            settings[key] = getattr(args, key)
    return settings


def write_history(path: str, history):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "accuracy"])
        writer.writerows((h.epoch, repr(h.loss), repr(h.accuracy)) for h in history)


def cmd_train(args) -> int:
    cfg = train_settings(args)
    seed = _seed(args)
    data = load_dataset(args.dataset, seed, args)
    encoding = EncodingConfig("amplitude") if args.dataset == "mnist4" else EncodingConfig("angle")
    layer = QuantumLayer.classifier(cfg["qubits"], cfg["layers"], data.n_classes, encoding)
    config = TrainConfig(cfg["epochs"], cfg["batch_size"], seed, cfg["lr"], cfg["strategy"],
                         cfg["init_scale"])
    result = train(layer, data, config)
    write_out(args.out, export_bundle(result.bundle))
    history = args.history or (str(Path(args.out).with_suffix(".history.csv")) if args.out else None)
    if history:
        write_history(history, result.history)
    payload = {"dataset": args.dataset, "seed": seed, "settings": cfg,
               "train_accuracy": result.train_accuracy, "test_accuracy": result.test_accuracy,
               "final_loss": result.history[-1].loss, "bundle": args.out, "history": history}
    emit(args, payload, f"{args.dataset} seed={seed}: train {result.train_accuracy:.3f} "
                        f"test {result.test_accuracy:.3f} loss {result.history[-1].loss:.4f}")
    return 0


def cmd_export(args) -> int:
    text = Path(args.bundle).read_text(encoding="utf-8")
    bundle = import_bundle(text)
    if args.format == "canonical":
        out = export_bundle(bundle)
    elif args.format == "qasm":
        out = export_qasm(bundle.circuit.bind(bundle.parameters.values))
    else:
        out = export_dialect(bundle.circuit, args.format, bundle.parameters, args.decimals)
    if args.out:
        write_out(args.out, out)
        emit(args, {"format": args.format, "out": args.out, "bytes": len(out.encode())},
             f"wrote {args.out}")
    else:
        sys.stdout.write(out if out.endswith("\n") else out + "\n")
    return 0


def cmd_roundtrip(args) -> int:
    bundle = import_bundle(Path(args.bundle).read_text(encoding="utf-8"))
    seed = _seed(args)
    xs = load_dataset(args.dataset, seed, args).x_test
    cfg = load_tolerances()["roundtrip"]
    vias = ["canonical", *DIALECTS] if args.via == "all" else [args.via]
    rows = []
    for via in vias:
        r = roundtrip_fidelity(bundle, via, xs, args.decimals)
        ok = r.fidelity > cfg["min_fidelity"] and r.max_l1 < cfg["max_l1"]
        rows.append({"via": via, "fidelity": r.fidelity, "max_l1": r.max_l1, "pass": ok})
    passed = all(r["pass"] for r in rows)
    text = "\n".join(f"{'PASS' if r['pass'] else 'FAIL'} {r['via']:<10} F_RT={r['fidelity']:.8f} "
                     f"max_l1={r['max_l1']:.2e}" for r in rows)
    emit(args, {"paths": rows, "pass": passed}, text)
    return 0 if passed else 3


def cmd_reproduce(args) -> int:
    names = None if args.table in (None, "all") else args.table.split(",")
    if names and any(n not in CHECKS for n in names):
        raise UsageError(f"--table must be 'all' or from {sorted(CHECKS)}")
    tol = load_tolerances(args.tolerances) if args.tolerances else None
    checks = run(names, tol)
    ok = all(c.passed for c in checks)
    text = "\n".join(c.line() for c in checks) + f"\n{'ALL PASS' if ok else 'FAILURES PRESENT'}"
    emit(args, {"checks": [c.to_dict() for c in checks], "pass": ok}, text)
    return 0 if ok else 3


# --- parser ------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qnnbridge", description="Quantum neural network toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        if seed:
            sp.add_argument("--seed", type=int, default=None,
                            help=f"random seed (default {DEFAULT_SEED}, printed to stderr)")

    sp = sub.add_parser("encode", help="build an encoding circuit")
    sp.add_argument("--kind", choices=KINDS, default="angle")
    sp.add_argument("--x", required=True, help="comma-separated features")
    sp.add_argument("--axis", default="y", choices=["x", "y", "z"])
    sp.add_argument("--repetitions", type=int, default=1)
    sp.add_argument("--epsilon", type=float, default=0.0)
    sp.add_argument("--profile", help="also check equivalence after transpiling")
    sp.add_argument("--out")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("grad", help="gradient of an expectation value")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--params")
    sp.add_argument("--observable", required=True, help='e.g. "ZI", "0.5*ZZ+XI", "proj:0000"')
    sp.add_argument("--strategy", choices=[s.value for s in Strategy], default="param_shift")
    sp.add_argument("--backend", help="run shifted circuits on a mock backend")
    sp.add_argument("--shots", type=int)
    common(sp)
    sp.set_defaults(func=cmd_grad)

    sp = sub.add_parser("transpile", help="compile for a target profile")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--profile", required=True, help="built-in name or profile JSON file")
    sp.add_argument("--params")
    sp.add_argument("--no-verify", action="store_true")
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_transpile)

    sp = sub.add_parser("score", help="rank backends for a circuit")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--weights", default="1,1,0", help="alpha,beta,gamma")
    sp.add_argument("--registry", help="backend registry JSON (default: bundled)")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("submit", help="run a job on a mock backend")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--params")
    sp.add_argument("--backend", required=True)
    sp.add_argument("--observable", help="omit to get counts")
    sp.add_argument("--shots", type=int)
    common(sp)
    sp.set_defaults(func=cmd_submit)

    sp = sub.add_parser("train", help="train the benchmark classifier")
    sp.add_argument("--dataset", choices=["iris", "wine", "mnist4"])
    sp.add_argument("--images")
    sp.add_argument("--labels")
    sp.add_argument("--config", help="JSON file of training settings; flags override it")
    sp.add_argument("--qubits", type=int)
    sp.add_argument("--layers", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--init-scale", type=float)
    sp.add_argument("--strategy", choices=[s.value for s in Strategy])
    sp.add_argument("--history", help="per-epoch CSV (default: next to --out)")
    sp.add_argument("--out", help="bundle path")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("export", help="convert a bundle")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--format", choices=["canonical", "qasm", *DIALECTS], default="canonical")
    sp.add_argument("--decimals", type=int)
    sp.add_argument("--out")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("roundtrip", help="round-trip fidelity of a bundle")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--dataset", choices=["iris", "wine", "mnist4"], default="iris")
    sp.add_argument("--images")
    sp.add_argument("--labels")
    sp.add_argument("--via", choices=["all", "canonical", *DIALECTS], default="all")
    sp.add_argument("--decimals", type=int)
    common(sp)
    sp.set_defaults(func=cmd_roundtrip)

    sp = sub.add_parser("reproduce", help="run the scripted reproductions")
    sp.add_argument("--table", default="all", help=f"'all' or comma list of {', '.join(CHECKS)}")
    sp.add_argument("--tolerances", help="alternative tolerance file")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors exit 1, --help and --version exit 0
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qnnbridge {args.command}: {exc}", file=sys.stderr)
        return 1
    except (CircuitError, ValueError, KeyError, OSError, np.linalg.LinAlgError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"qnnbridge {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
