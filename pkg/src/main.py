"""
主程序入口
命令行流水线：generate → train → attack → fit-detector → estimate → bootstrap → curve
"""
import asyncio
import functools
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import click
from loguru import logger
from pydantic import ValidationError

from config.settings import Settings, load_settings, settings
from src.core.errors import ConfigError, PdamError
from src.core.models import (
    Activation, Architecture, AttackName, AttackSpec, DatasetKind, DistanceMetric,
    SuccessCriterion, SyntheticSpec, TrainingHyper
)
from src.detection.fitting import fit_logistic
from src.detection.functions import DetectionFunction, LogisticDetection, StepDetection
from src.estimators.metrics import asr_curve
from src.estimators.risk import average_detection_fn
from src.estimators.summary import summary_table
from src.managers.attack_manager import AttackManager, filter_initially_correct
from src.stats.bootstrap import BandMetric, bootstrap_band, default_n_grid
from src.storage.artifacts import (
    emit_curve, read_dataset, read_detection, read_detection_samples, read_model,
    write_bands, write_dataset, write_detection, write_model
)
from src.storage.candidates import write_candidates
from src.storage.records import read_pooled, write_records
from src.storage.reports import ReportFormat, emit_report
from src.toy.datasets import generate_dataset
from src.toy.trainer import evaluate_accuracy, train_with_history

LOG_FORMAT = ("<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
              "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>")
FILE_LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None):
    """设置日志系统；stdout 留给命令结果"""
    logger.remove()
    logger.add(sys.stderr, format=LOG_FORMAT, level=level)
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(log_file, format=FILE_LOG_FORMAT, level=level, rotation="1 day", retention="30 days")


def handle_errors(func):
    """把异常映射为退出码：配置 2，IO 3，数值 4"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PdamError as e:
            logger.error(f"{func.__name__} 失败: {str(e)}")
            click.echo(f"错误: {str(e)}", err=True)
            sys.exit(e.exit_code)
        except ValidationError as e:
            logger.error(f"{func.__name__} 参数非法: {str(e)}")
            click.echo(f"错误: 参数非法: {str(e)}", err=True)
            sys.exit(ConfigError.exit_code)
        except ValueError as e:
            logger.error(f"{func.__name__} 配置非法: {str(e)}")
            click.echo(f"错误: 配置非法: {str(e)}", err=True)
            sys.exit(ConfigError.exit_code)
        except OSError as e:
            logger.error(f"{func.__name__} 文件读写失败: {str(e)}")
            click.echo(f"错误: 文件读写失败: {str(e)}", err=True)
            sys.exit(3)

    return wrapper


# ---------------------------------------------------------------------------
# 参数解析
# ---------------------------------------------------------------------------

def parse_number(text: str) -> float:
    """十进制数或分数，如 8/255"""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"无法解析的数值: {text!r}")


def parse_numbers(text: Optional[str], default: Sequence[float]) -> List[float]:
    if text is None:
        return list(default)
    return [parse_number(part) for part in text.split(",") if part.strip()]


def parse_clip(text: Optional[str]) -> Optional[Tuple[float, float]]:
    if not text:
        return None
    parts = parse_numbers(text, [])
    if len(parts) != 2 or parts[0] >= parts[1]:
        raise ConfigError(f"--clip 需要 lo,hi 且 lo < hi，收到 {text!r}")
    return parts[0], parts[1]


def parse_attack_names(text: Optional[str], default: Sequence[str]) -> List[AttackName]:
    names = list(default) if text is None else [part.strip() for part in text.split(",") if part.strip()]
    if not names or names == ["none"]:
        raise ConfigError("攻击集合为空，至少需要一个攻击")
    try:
        return [AttackName(name) for name in names]
    except ValueError:
        raise ConfigError(f"未知的攻击: {names}，可选 {[a.value for a in AttackName]}")


def build_attack_specs(names: Sequence[AttackName], epsilon_grid: Sequence[float], pgd_steps: int,
                       random_steps: int, step_size: str, seed: int) -> List[AttackSpec]:
    """默认 3 个攻击 x 8 个 epsilon 得到 |A| = 24"""
    resolved_step = "auto" if step_size == "auto" else parse_number(step_size)
    specs = []
    for name in names:
        steps = {AttackName.PGD: pgd_steps, AttackName.RANDOM: random_steps}.get(name, 1)
        specs.append(AttackSpec(name=name, epsilon_grid=tuple(epsilon_grid), steps=steps,
                                step_size=resolved_step, seed=seed))
    return specs


def resolve_detection(source: str) -> Optional[DetectionFunction]:
    """
    解析检测来源

    Args:
        source: step:θ、logistic:FILE、logistic:beta0,beta1、file:FILE 或 average

    Returns:
        检测函数；average 返回 None，表示无检测器估计
    """
    kind, _, value = source.partition(":")
    if kind == "average" and not value:
        return None
    if kind == "step" and value:
        return StepDetection(theta=parse_number(value))
    if kind == "logistic" and value:
        if Path(value).is_file():
            detection = read_detection(value)
            if not isinstance(detection, LogisticDetection):
                raise ConfigError(f"{value} 不是逻辑回归检测函数")
            return detection
        params = parse_numbers(value, [])
        if len(params) != 2:
            raise ConfigError(f"logistic 需要参数文件或 beta0,beta1，收到 {value!r}")
        return LogisticDetection(beta0=params[0], beta1=params[1])
    if kind == "file" and value:
        return read_detection(value)
    raise ConfigError(f"无法识别的检测来源: {source!r}（可选 step:θ, logistic:..., file:..., average）")


def _settings(ctx: click.Context) -> Settings:
    return ctx.obj


# ---------------------------------------------------------------------------
# 命令
# ---------------------------------------------------------------------------

@click.group()
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="key=value 配置文件，命令行参数优先")
@click.option("--log-level", default=None, help="日志级别")
@click.option("--log-file", default=None, help="日志文件")
@click.version_option(version=settings.VERSION, prog_name="pdam")
@click.pass_context
def cli(ctx: click.Context, config_file: Optional[str], log_level: Optional[str], log_file: Optional[str]):
    """对抗攻击下的损害概率评估"""
    try:
        cfg = load_settings(config_file)
    except ValidationError as e:
        click.echo(f"错误: 配置文件非法: {str(e)}", err=True)
        sys.exit(ConfigError.exit_code)
    setup_logging(log_level or cfg.LOG_LEVEL, log_file or cfg.LOG_FILE)
    ctx.obj = cfg


@cli.command("generate")
@click.option("--kind", type=click.Choice([k.value for k in DatasetKind]), default=DatasetKind.GAUSSIAN_BLOBS.value)
@click.option("--n", "n", type=int, default=None, help="观测数，默认 N_OBSERVATIONS")
@click.option("--dim", type=int, default=2)
@click.option("--classes", type=int, default=2)
@click.option("--noise", type=float, default=0.5)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
@handle_errors
def cmd_generate(ctx, kind, n, dim, classes, noise, seed, out):
    """生成合成数据集"""
    cfg = _settings(ctx)
    spec = SyntheticSpec(kind=kind, n=cfg.N_OBSERVATIONS if n is None else n, dim=dim, num_classes=classes,
                         noise=noise, seed=cfg.DEFAULT_SEED if seed is None else seed)
    dataset = generate_dataset(spec)
    write_dataset(dataset, out)
    click.echo(f"{len(dataset)}")


@cli.command("train")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--model-id", required=True)
@click.option("--arch", type=click.Choice(["linear", "mlp"]), default="linear")
@click.option("--hidden", default="", help="隐藏层宽度，如 16,16")
@click.option("--activation", type=click.Choice([a.value for a in Activation]), default=Activation.RELU.value)
@click.option("--lr", type=float, default=0.1)
@click.option("--epochs", type=int, default=100)
@click.option("--batch", type=int, default=32)
@click.option("--l2", type=float, default=0.0)
@click.option("--seed", type=int, default=None)
@click.pass_context
@handle_errors
def cmd_train(ctx, data, out, model_id, arch, hidden, activation, lr, epochs, batch, l2, seed):
    """训练分类器并打印训练准确率"""
    cfg = _settings(ctx)
    try:
        hidden_sizes = tuple(int(h) for h in hidden.split(",") if h.strip())
    except ValueError:
        raise ConfigError(f"--hidden 必须为逗号分隔的整数，收到 {hidden!r}")
    architecture = Architecture(kind=arch, hidden_sizes=hidden_sizes, activation=activation)
    hyper = TrainingHyper(lr=lr, epochs=epochs, batch=batch, l2=l2,
                          seed=cfg.DEFAULT_SEED if seed is None else seed)
    dataset = read_dataset(data)
    predictor, _ = train_with_history(dataset, architecture, hyper, model_id)
    write_model(predictor, out)
    click.echo(f"{evaluate_accuracy(predictor, dataset):.4f}")


@cli.command("attack")
@click.option("--model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="扰动记录文件")
@click.option("--candidates", "candidates_out", type=click.Path(dir_okay=False), default=None, help="候选文件")
@click.option("--attacks", default=None, help="逗号分隔的攻击名，默认 ATTACK_NAMES")
@click.option("--eps", default=None, help="epsilon 网格，如 1/255,2/255，默认 EPSILON_GRID")
@click.option("--pgd-steps", type=int, default=None)
@click.option("--random-steps", type=int, default=None)
@click.option("--step-size", default="auto")
@click.option("--metric", type=click.Choice([m.value for m in DistanceMetric]), default=None)
@click.option("--criterion", type=click.Choice([c.value for c in SuccessCriterion]), default=None)
@click.option("--clip", default=None, help="特征取值范围 lo,hi")
@click.option("--filter-initially-correct/--keep-all", "filter_correct", default=None)
@click.option("--filter-model", "filter_models", multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="过滤时一并要求这些模型分类正确，使多个模型共享样本")
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=None)
@click.pass_context
@handle_errors
def cmd_attack(ctx, model, data, out, candidates_out, attacks, eps, pgd_steps, random_steps, step_size,
               metric, criterion, clip, filter_correct, filter_models, workers, seed):
    """执行攻击集合，写出候选与归约后的记录，打印成功比例"""
    cfg = _settings(ctx)
    names = parse_attack_names(attacks, cfg.ATTACK_NAMES)
    epsilon_grid = parse_numbers(eps, cfg.EPSILON_GRID)
    specs = build_attack_specs(names, epsilon_grid, cfg.PGD_STEPS if pgd_steps is None else pgd_steps,
                               cfg.RANDOM_STEPS if random_steps is None else random_steps, step_size,
                               cfg.DEFAULT_SEED if seed is None else seed)
    metric = DistanceMetric(metric or cfg.DISTANCE_METRIC)
    criterion = SuccessCriterion(criterion or cfg.SUCCESS_CRITERION)
    manager = AttackManager(specs, criterion, metric, parse_clip(clip),
                            cfg.MAX_WORKERS if workers is None else workers)

    predictor = read_model(model)
    dataset = read_dataset(data)
    if predictor.dim != dataset.dim:
        raise ConfigError(f"模型维度 {predictor.dim} 与数据维度 {dataset.dim} 不符")
    if cfg.FILTER_INITIALLY_CORRECT if filter_correct is None else filter_correct:
        dataset = filter_initially_correct(dataset, [predictor] + [read_model(p) for p in filter_models])

    if manager.max_workers > 1:
        candidates = asyncio.run(manager.run_async(predictor, dataset))
    else:
        candidates = manager.run(predictor, dataset)
    outcome = manager.reduce(candidates, dataset, predictor.model_id)

    if candidates_out:
        write_candidates(candidates, candidates_out, metric)
    write_records(outcome, out)
    fraction = outcome.finite_count / len(outcome) if len(outcome) else 0.0
    logger.info(f"模型 {predictor.model_id}: |A|={manager.attack_count}, 成功 {outcome.finite_count}/{len(outcome)}")
    click.echo(f"{fraction:.4f}")


@cli.command("fit-detector")
@click.option("--samples", type=click.Path(exists=True, dir_okay=False), required=True, help="CSV tau,undetected")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--l2", type=float, default=None, help="岭惩罚，默认 DETECTION_L2")
@click.pass_context
@handle_errors
def cmd_fit_detector(ctx, samples, out, l2):
    """拟合逻辑回归检测函数并写出参数"""
    cfg = _settings(ctx)
    detection = fit_logistic(read_detection_samples(samples), l2=cfg.DETECTION_L2 if l2 is None else l2)
    write_detection(detection, out)
    diagnostics = detection.diagnostics
    click.echo(f"beta0\t{detection.beta0:.6g}")
    click.echo(f"beta1\t{detection.beta1:.6g}")
    click.echo(f"log_likelihood\t{diagnostics.log_likelihood:.6g}")
    click.echo(f"iterations\t{diagnostics.iterations}")
    click.echo(f"converged\t{str(diagnostics.converged).lower()}")


@cli.command("estimate")
@click.argument("records", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--detection", "source", default="average", help="step:θ | logistic:FILE | logistic:b0,b1 | file:FILE | average")
@click.option("--taus", default=None, help="ASR 阈值，默认 TAUS")
@click.option("--c-dam", type=float, default=None, help="损害成本，给出时追加风险列")
@click.option("--format", "fmt", type=click.Choice([f.value for f in ReportFormat]), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
@handle_errors
def cmd_estimate(ctx, records, source, taus, c_dam, fmt, out):
    """估计每个模型的 P^dam 并输出汇总表"""
    cfg = _settings(ctx)
    tau_list = parse_numbers(taus, cfg.TAUS)
    if not tau_list:
        raise ConfigError("τ 列表为空，ASR 列需要至少一个阈值")
    detection = resolve_detection(source)
    outcomes = read_pooled(list(records))
    if detection is None and len(outcomes) == 1:
        logger.warning("无检测器估计只有一个记录文件，建议至少两个模型")
    rows = summary_table(outcomes, tau_list, detection, c_dam)
    text = emit_report(rows, fmt or cfg.REPORT_FORMAT)
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    click.echo(text, nl=False)


@cli.command("bootstrap")
@click.argument("records", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--metric", "metrics", multiple=True, type=click.Choice([m.value for m in BandMetric]),
              default=(BandMetric.PDAM_DETECTOR_FREE.value,))
@click.option("--detection", "source", default=None, help="pdam-surrogate 使用的检测来源")
@click.option("--tau", default=None, help="asr 使用的阈值")
@click.option("--reps", type=int, default=None)
@click.option("--n-min", type=int, default=None)
@click.option("--n-max", type=int, default=None)
@click.option("--n-step", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
@handle_errors
def cmd_bootstrap(ctx, records, metrics, source, tau, reps, n_min, n_max, n_step, seed, out):
    """自助法分位带，写出 CSV"""
    cfg = _settings(ctx)
    outcomes = read_pooled(list(records))
    detection = resolve_detection(source) if source else None
    tau_value = parse_number(tau) if tau is not None else None
    n_grid = default_n_grid(cfg.BOOTSTRAP_N_MIN if n_min is None else n_min,
                            cfg.BOOTSTRAP_N_MAX if n_max is None else n_max,
                            cfg.BOOTSTRAP_N_STEP if n_step is None else n_step)
    bands = []
    for metric in metrics:
        bands.extend(bootstrap_band(outcomes, metric, n_grid, cfg.BOOTSTRAP_REPS if reps is None else reps,
                                    cfg.DEFAULT_SEED if seed is None else seed, detection, tau_value))
    write_bands(bands, out)
    click.echo(f"{len(bands)}")


@cli.command("curve")
@click.argument("records", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--average", is_flag=True, help="输出集成平均检测曲线 Ψ^avg")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
@handle_errors
def cmd_curve(ctx, records, average, out):
    """导出 ASR 阶梯曲线或 Ψ^avg 曲线"""
    outcomes = read_pooled(list(records))
    if average:
        detection = average_detection_fn(outcomes)
        taus = sorted({d for d in detection.pooled if d != float("inf")})
        points = list(zip(taus, detection.evaluate_many(taus).tolist()))
    else:
        if len(outcomes) != 1:
            raise ConfigError("ASR 曲线只接受一个记录文件，多个文件请使用 --average")
        points = asr_curve(outcomes[0])
    emit_curve(points, out)
    click.echo(f"{len(points)}")


def main():
    """主函数"""
    cli(prog_name="pdam")


if __name__ == "__main__":
    main()
