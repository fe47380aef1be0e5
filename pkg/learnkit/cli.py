"""Command-line interface for learnkit."""

import logging
import sys
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from . import __version__
from .bbn import (
    BeliefRow,
    belief_report,
    enumerate_joint,
    parse_evidence,
    parse_network,
    propagate,
)
from .config import ENV_PREFIX, LOG_LEVELS, Config
from .dataset import (
    MODES,
    Dataset,
    binarize_labels,
    load_csv,
    split,
    summarize,
    write_csv,
)
from .errors import ConfigError, DataError, LearnkitError, NoPredictionError
from .hedge import (
    LossKind,
    cumulative_losses,
    format_trace,
    init_pool,
    load_stream,
    run_stream,
)
from .report import (
    NONE_LABEL,
    evaluate,
    render_beliefs,
    render_comparison,
    render_report,
)
from .svm import (
    KernelKind,
    KernelSpec,
    decision_value,
    dual_objective,
    kkt_residual,
    load_model,
    loo_bound,
    predict,
    save_model,
    train,
)
from .tabular import (
    format_rulesets,
    gt_learn_all,
    gt_predict,
    load_nb_model,
    nb_classify,
    nb_predict,
    nb_train,
    parse_rulesets,
    save_nb_model,
)
from .transduce import batch_transduce, format_verdicts

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

existing_file = click.Path(exists=True, dir_okay=False)


class LearnkitGroup(click.Group):
    """Click group mapping failures to exit codes: 1 usage, 2 data or numerics."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(
                args=args,
                prog_name=prog_name,
                complete_var=complete_var,
                standalone_mode=False,
                **extra,
            )
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except (LearnkitError, ValueError, ArithmeticError, OSError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_DATA)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def _settings(ctx: click.Context) -> Config:
    return ctx.find_root().obj


def _load(path: str, label: str, mode: str, positive: Optional[str] = None) -> Dataset:
    ds = load_csv(path, label, mode)
    logger.info("Loaded %d examples with %d attributes from %s", len(ds), ds.n_attributes, path)
    return binarize_labels(ds, positive) if positive else ds


def _kernel(kind: str, degree: int, gamma: float) -> KernelSpec:
    try:
        return KernelSpec(KernelKind(kind), degree=degree, gamma=gamma)
    except ValueError as e:
        raise click.BadParameter(str(e)) from None


def _write_text(path: Optional[str], text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        click.echo(text, nl=False)


def data_options(f):
    f = click.option(
        "--mode",
        type=click.Choice(MODES),
        default="numeric",
        show_default=True,
        help="Attribute parsing: numeric floats or binary Y/N/1/0",
    )(f)
    f = click.option("--label", "-l", required=True, help="Name of the class column")(f)
    return f


def kernel_options(f):
    f = click.option("--gamma", type=float, default=1.0, show_default=True, help="RBF gamma")(f)
    f = click.option("--degree", type=int, default=2, show_default=True, help="Polynomial degree")(f)
    f = click.option(
        "--kernel",
        "-k",
        type=click.Choice([kind.value for kind in KernelKind]),
        default="linear",
        show_default=True,
        help="Kernel function",
    )(f)
    return f


@click.group(cls=LearnkitGroup)
@click.version_option(version=__version__, prog_name="learnkit")
@click.option(
    "--config",
    "config_path",
    type=existing_file,
    help="YAML file overriding configuration defaults",
)
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    help="Logging level for diagnostics on stderr",
)
@click.pass_context
def main(ctx: click.Context, config_path: Optional[str], log_level: Optional[str]):
    """Kernel SVMs, transductive confidence, G&T rules, simple Bayes,
    belief networks and the Aggregating Algorithm."""
    try:
        base = Config.from_env()
    except ValidationError as e:
        raise ConfigError(f"invalid {ENV_PREFIX}* environment: {e}") from None

    try:
        settings = Config.from_yaml(config_path, base=base) if config_path else base
        if log_level:
            settings = settings.model_copy(update={"log_level": log_level.upper()})
    except (ValidationError, ValueError) as e:
        raise click.BadParameter(str(e), param_hint="--config") from None

    logging.basicConfig(level=settings.log_level, format=LOG_FORMAT, stream=sys.stderr)
    ctx.obj = settings


# Datasets


@main.group()
def data():
    """Inspect and split datasets."""


@data.command("summary")
@click.option("--data", "-d", "data_path", type=existing_file, required=True, help="CSV dataset")
@data_options
def data_summary(data_path: str, label: str, mode: str):
    """Print example, attribute and per-class counts."""
    summary = summarize(_load(data_path, label, mode))
    click.echo(f"examples: {summary.n_examples}")
    click.echo(f"attributes: {summary.n_attributes}")
    click.echo("class\tcount")
    for class_id, count in summary.class_counts.items():
        click.echo(f"{class_id}\t{count}")


@data.command("split")
@click.option("--data", "-d", "data_path", type=existing_file, required=True, help="CSV dataset")
@data_options
@click.option("--fraction", type=float, default=0.5, show_default=True, help="Share of the first part")
@click.option("--seed", type=int, required=True, help="Random seed")
@click.option("--out-train", type=click.Path(dir_okay=False), required=True, help="First part")
@click.option("--out-test", type=click.Path(dir_okay=False), required=True, help="Second part")
def data_split(
    data_path: str,
    label: str,
    mode: str,
    fraction: float,
    seed: int,
    out_train: str,
    out_test: str,
):
    """Randomly split a dataset into a training and a testing part."""
    first, second = split(_load(data_path, label, mode), fraction, seed)
    write_csv(first, out_train, mode)
    write_csv(second, out_test, mode)
    click.echo(f"train: {len(first)}")
    click.echo(f"test: {len(second)}")


# Support vector machines


@main.group()
def svm():
    """Train and apply support vector machines."""


@svm.command("train")
@click.option("--data", "-d", "data_path", type=existing_file, required=True, help="CSV training set")
@data_options
@click.option("--positive", help="Class mapped to +1 (labels must be +1/-1 otherwise)")
@kernel_options
@click.option("--c", "box_c", type=float, help="Box constraint [default: from config]")
@click.option("--tol", type=float, help="KKT tolerance [default: from config]")
@click.option("--out", "-o", type=click.Path(dir_okay=False), required=True, help="Model file")
@click.pass_context
def svm_train(
    ctx: click.Context,
    data_path: str,
    label: str,
    mode: str,
    positive: Optional[str],
    kernel: str,
    degree: int,
    gamma: float,
    box_c: Optional[float],
    tol: Optional[float],
    out: str,
):
    """Train an SVM and report its support vectors and leave-one-out bound."""
    settings = _settings(ctx)
    ds = _load(data_path, label, mode, positive)
    model = train(
        ds,
        _kernel(kernel, degree, gamma),
        box_c=box_c if box_c is not None else settings.box_c,
        tol=tol if tol is not None else settings.svm_tol,
        sv_tolerance=settings.sv_tolerance,
        max_iter=settings.max_iter,
    )
    save_model(model, out)
    click.echo(f"examples: {len(ds)}")
    click.echo(f"support vectors: {model.n_support}")
    click.echo(f"loo bound: {loo_bound(model):.6f}")
    click.echo(f"bias: {model.bias:.6f}")
    click.echo(f"dual objective: {dual_objective(model):.6f}")
    click.echo(f"kkt residual: {kkt_residual(model):.6f}")


@svm.command("predict")
@click.option("--model", "-m", "model_path", type=existing_file, required=True, help="Model file")
@click.option("--data", "-d", "data_path", type=existing_file, required=True, help="CSV examples")
@data_options
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="Output TSV (stdout when omitted)")
def svm_predict(model_path: str, data_path: str, label: str, mode: str, out: Optional[str]):
    """Print decision values and +1/-1 predictions as TSV."""
    model = load_model(model_path)
    ds = _load(data_path, label, mode)
    lines = ["index\tdecision\tprediction"]
    for index, example in enumerate(ds):
        value = decision_value(model, example.features)
        sign = predict(model, example.features)
        lines.append(f"{index}\t{value:.6f}\t{'+1' if sign > 0 else '-1'}")
    _write_text(out, "\n".join(lines) + "\n")


# Transduction


@main.command()
@click.option("--train", "train_path", type=existing_file, required=True, help="CSV training set")
@click.option("--test", "test_path", type=existing_file, required=True, help="CSV test set")
@data_options
@click.option("--positive", help="Class mapped to BLACK (+1); others become WHITE (-1)")
@kernel_options
@click.option("--c", "box_c", type=float, help="Box constraint [default: from config]")
@click.option("--tol", type=float, help="KKT tolerance [default: from config]")
@click.option("--workers", type=int, help="Worker threads [default: from config]")
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="Output TSV (stdout when omitted)")
@click.pass_context
def transduce(
    ctx: click.Context,
    train_path: str,
    test_path: str,
    label: str,
    mode: str,
    positive: Optional[str],
    kernel: str,
    degree: int,
    gamma: float,
    box_c: Optional[float],
    tol: Optional[float],
    workers: Optional[int],
    out: Optional[str],
):
    """Predict every test point BLACK/WHITE/NONE with transductive confidence."""
    settings = _settings(ctx)
    train_set = _load(train_path, label, mode, positive)
    test_set = load_csv(test_path, label, mode)
    verdicts = batch_transduce(
        train_set,
        test_set,
        _kernel(kernel, degree, gamma),
        box_c=box_c if box_c is not None else settings.box_c,
        tol=tol if tol is not None else settings.svm_tol,
        sv_tolerance=settings.sv_tolerance,
        workers=workers if workers is not None else settings.workers,
    )
    _write_text(out, format_verdicts(verdicts))


# G&T rules


@main.group()
def gt():
    """Learn and apply G&T chi-square rules."""


@gt.command("learn")
@click.option("--data", "-d", "data_path", type=existing_file, required=True, help="CSV training set")
@click.option("--label", "-l", required=True, help="Name of the class column")
@click.option("--min-leaf", type=int, default=1, show_default=True, help="Smallest split part")
@click.option("--max-depth", type=int, help="Largest number of conditions [default: attribute count]")
@click.option("--level", type=float, help="Confidence level [default: from config]")
@click.option("--out", "-o", type=click.Path(dir_okay=False), required=True, help="Rule file")
@click.pass_context
def gt_learn_cmd(
    ctx: click.Context,
    data_path: str,
    label: str,
    min_leaf: int,
    max_depth: Optional[int],
    level: Optional[float],
    out: str,
):
    """Learn one rule set per class (class against the rest)."""
    settings = _settings(ctx)
    ds = _load(data_path, label, "binary")
    rulesets = gt_learn_all(
        ds,
        min_leaf=min_leaf,
        max_depth=max_depth,
        level=level if level is not None else settings.confidence_level,
    )
    Path(out).write_text(format_rulesets(rulesets))
    click.echo("class\tleaves")
    for ruleset in rulesets:
        click.echo(f"{ruleset.class_id}\t{len(ruleset.leaves)}")


@gt.command("predict")
@click.option("--rules", "-r", "rules_path", type=existing_file, required=True, help="Rule file")
@click.option("--data", "-d", "data_path", type=existing_file, required=True, help="CSV examples")
@click.option("--label", "-l", required=True, help="Name of the class column")
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="Output TSV (stdout when omitted)")
def gt_predict_cmd(rules_path: str, data_path: str, label: str, out: Optional[str]):
    """Predict the class with the most probable matching leaf."""
    rulesets = parse_rulesets(Path(rules_path).read_text())
    ds = _load(data_path, label, "binary")
    lines = ["index\tprediction\tp\tci_low\tci_high"]
    for index, example in enumerate(ds):
        try:
            result = gt_predict(rulesets, example.features)
        except NoPredictionError:
            lines.append(f"{index}\t{NONE_LABEL}\t\t\t")
            continue
        low, high = result.interval
        lines.append(f"{index}\t{result.class_id}\t{result.p:.6f}\t{low:.6f}\t{high:.6f}")
    _write_text(out, "\n".join(lines) + "\n")


# Simple Bayes


@main.group()
def nb():
    """Train and apply the simple Bayes classifier."""


@nb.command("train")
@click.option("--data", "-d", "data_path", type=existing_file, required=True, help="CSV training set")
@click.option("--label", "-l", required=True, help="Name of the class column")
@click.option("--smoothing", type=float, help="Additive smoothing [default: from config]")
@click.option("--out", "-o", type=click.Path(dir_okay=False), required=True, help="Model file (JSON)")
@click.pass_context
def nb_train_cmd(ctx: click.Context, data_path: str, label: str, smoothing: Optional[float], out: str):
    """Estimate class priors and attribute conditionals."""
    settings = _settings(ctx)
    ds = _load(data_path, label, "binary")
    model = nb_train(ds, smoothing if smoothing is not None else settings.smoothing)
    save_nb_model(model, out)
    click.echo("class\tprior")
    for class_id, prior in zip(model.classes, model.class_priors):
        click.echo(f"{class_id}\t{prior:.6f}")


@nb.command("predict")
@click.option("--model", "-m", "model_path", type=existing_file, required=True, help="Model file")
@click.option("--data", "-d", "data_path", type=existing_file, required=True, help="CSV examples")
@click.option("--label", "-l", required=True, help="Name of the class column")
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="Output TSV (stdout when omitted)")
def nb_predict_cmd(model_path: str, data_path: str, label: str, out: Optional[str]):
    """Print the most probable class and every class posterior as TSV."""
    model = load_nb_model(model_path)
    ds = _load(data_path, label, "binary")
    lines = ["\t".join(["index", "prediction"] + [f"p({c})" for c in model.classes])]
    for index, example in enumerate(ds):
        best, _ = nb_classify(model, example.features)
        posterior = nb_predict(model, example.features)
        cells = [str(index), best] + [f"{posterior[c]:.6f}" for c in model.classes]
        lines.append("\t".join(cells))
    _write_text(out, "\n".join(lines) + "\n")


# Belief networks


@main.group()
def bbn():
    """Query tree-structured Bayesian belief networks."""


@bbn.command("validate")
@click.option("--net", "-n", "net_path", type=existing_file, required=True, help="Network file")
def bbn_validate(net_path: str):
    """Check the structure and CPTs of a network."""
    net = parse_network(Path(net_path).read_text())
    click.echo(f"valid network: {len(net.nodes)} nodes, {len(net.roots())} roots")


@bbn.command("query")
@click.option("--net", "-n", "net_path", type=existing_file, required=True, help="Network file")
@click.option("--evidence", "-e", default="", help="Observations as NAME=STATE,NAME=STATE")
@click.option(
    "--method",
    type=click.Choice(["pearl", "enumerate"]),
    default="pearl",
    show_default=True,
    help="Message passing or brute-force joint enumeration",
)
@click.pass_context
def bbn_query(ctx: click.Context, net_path: str, evidence: str, method: str):
    """Print initial and revised beliefs for every node."""
    net = parse_network(Path(net_path).read_text())
    observed = parse_evidence(evidence)
    rows = belief_report(net, observed)
    if method == "enumerate":
        max_states = _settings(ctx).max_joint_states
        prior = enumerate_joint(net, max_states=max_states)
        posterior = enumerate_joint(net, observed, max_states=max_states)
        rows = [
            BeliefRow(
                row.node,
                row.state,
                float(prior.of(row.node, row.state, net)),
                float(posterior.of(row.node, row.state, net)),
            )
            for row in rows
        ]
    click.echo(render_beliefs(rows, observed), nl=False)


# Aggregating Algorithm


@main.group()
def aa():
    """Run the Aggregating Algorithm over expert predictions."""


@aa.command("run")
@click.option("--stream", "-s", "stream_path", type=existing_file, required=True, help="Stream TSV")
@click.option("--eta", type=float, default=1.0, show_default=True, help="Learning rate")
@click.option(
    "--loss",
    type=click.Choice([kind.value for kind in LossKind]),
    default=LossKind.LOG.value,
    show_default=True,
    help="Loss function",
)
@click.option("--prior", help="Comma-separated prior weights (uniform when omitted)")
@click.option("--loss-cap", type=float, help="Per-round log-loss cap [default: from config]")
@click.option("--summary", is_flag=True, help="Append cumulative losses as comment lines")
@click.pass_context
def aa_run(
    ctx: click.Context,
    stream_path: str,
    eta: float,
    loss: str,
    prior: Optional[str],
    loss_cap: Optional[float],
    summary: bool,
):
    """Print the merged prediction and weights after every round."""
    rounds = load_stream(stream_path)
    if not rounds:
        raise DataError(f"Stream {stream_path} has no rounds")
    k = len(rounds[0][0])
    try:
        weights = [float(w) for w in prior.split(",")] if prior else None
    except ValueError:
        raise click.BadParameter("prior weights must be numbers", param_hint="--prior") from None
    pool = init_pool(k, weights, eta, LossKind(loss))
    cap = loss_cap if loss_cap is not None else _settings(ctx).log_loss_cap
    trace = run_stream(pool, rounds, loss_cap=cap)
    click.echo(format_trace(trace, k), nl=False)
    if summary:
        totals = cumulative_losses(trace)
        click.echo(f"# merged loss: {totals.merged:.8f}")
        click.echo("# expert losses: " + ",".join(f"{v:.8f}" for v in totals.experts))
        click.echo(f"# regret: {totals.regret:.8f}")


# Evaluation


def _read_column(path: str, column: str) -> list[str]:
    lines = [line for line in Path(path).read_text().splitlines() if line]
    if not lines:
        raise DataError(f"Empty predictions file: {path}")
    header = lines[0].split("\t")
    if column not in header:
        raise DataError(f"Column {column!r} not found in {path}")
    index = header.index(column)
    values = []
    for row, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(header):
            raise DataError(f"Row {row} of {path}: expected {len(header)} fields")
        values.append(cells[index])
    return values


def _predictor_sources(values: tuple, name: str) -> list[tuple[str, str]]:
    """Resolve ``--predictions`` values given as PATH or NAME=PATH."""
    sources = []
    for value in values:
        label, sep, path = value.partition("=")
        if not sep or Path(value).is_file():
            label, path = (name if len(values) == 1 else Path(value).stem), value
        if not Path(path).is_file():
            raise click.BadParameter(f"File {path!r} does not exist", param_hint="--predictions")
        sources.append((label, path))
    labels = [label for label, _ in sources]
    duplicates = sorted({label for label in labels if labels.count(label) > 1})
    if duplicates:
        raise click.BadParameter(
            f"duplicate predictor name {duplicates[0]!r}", param_hint="--predictions"
        )
    return sources


@main.command("eval")
@click.option(
    "--predictions",
    "-p",
    "predictions",
    multiple=True,
    required=True,
    help="Predictions TSV as PATH or NAME=PATH (repeat to compare predictors)",
)
@click.option("--truth", "-t", type=existing_file, required=True, help="CSV with true labels")
@data_options
@click.option("--column", default="prediction", show_default=True, help="Predictions column")
@click.option("--name", default="model", show_default=True, help="Row name for a single unnamed file")
@click.option(
    "--map",
    "mappings",
    multiple=True,
    help="Rename a predicted token before comparing, e.g. BLACK=App (repeatable)",
)
def eval_cmd(
    predictions: tuple,
    truth: str,
    label: str,
    mode: str,
    column: str,
    name: str,
    mappings: tuple,
):
    """Report accuracy in percent of correct predictions.

    With several --predictions every file is scored against the same truth
    and one comparison row is printed per predictor.
    """
    rename = {}
    for item in mappings:
        token, sep, target = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected TOKEN=CLASS, got {item!r}", param_hint="--map")
        rename[token] = target

    sources = _predictor_sources(predictions, name)
    actual = load_csv(truth, label, mode).labels
    rows = []
    for predictor, path in sources:
        predicted = [rename.get(p, p) for p in _read_column(path, column)]
        rows.append((predictor, evaluate(predicted, actual)))

    if len(rows) == 1:
        click.echo(render_report(rows[0][1], rows[0][0]), nl=False)
    else:
        click.echo(render_comparison(rows), nl=False)


if __name__ == "__main__":
    main()
