#!/usr/bin/env python3
"""
qdimer: эксперименты с двойными димерами и кватернионным определителем Кастелейна

Подкоманды:
  graph     построить граф и проверить вложение
  sample    точные выборки двойных димеров (JSON lines)
  verify    наборы проверок инвариантов
  cylinder  распределение числа циклов на цилиндре (CSV)
  twopoint  среднее число циклов вокруг двух точек
  haar      коэффициенты по ламинациям через интеграл Хаара

Код возврата 0, если все проверки пройдены, иначе 1.
"""

import argparse
import os
import sys

sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from config.config import Config
from core.exact_module import CONVENTIONS
from dimer_lab import SUITES, DimerLab, setup_logging


def _complex(text: str) -> complex:
    """Точка как '0,1', '0+1j' или '1j'"""
    text = text.strip()
    if "," in text:
        x, y = text.split(",", 1)
        return complex(float(x), float(y))
    try:
        return complex(text.replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"Некорректная точка: {text}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="YAML с настройками экспериментов")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=str, default=None)
    common.add_argument("--workers", type=int, default=None, help=f"потоков (по умолчанию {Config.THREADS})")
    common.add_argument("--data-dir", type=str, default=Config.DATA_DIR)
    common.add_argument("--timing", action="store_true", help="записать время выполнения в отчёт")

    ap = argparse.ArgumentParser(prog="qdimer", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", parents=[common], help="построить граф")
    p.add_argument("--kind", choices=("region", "grid", "cylinder"), default=None)
    p.add_argument("--spec", type=str, default=None, help="описание графа (JSON/YAML)")

    p = sub.add_parser("sample", parents=[common], help="выборки двойных димеров")
    p.add_argument("--graph", type=str, default=None, help="граф в JSON")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--zipper", type=str, action="append", default=None, help="молния в JSON (повторяемый)")

    p = sub.add_parser("verify", parents=[common], help="наборы проверок")
    p.add_argument("suite", choices=SUITES + ("all",))

    p = sub.add_parser("cylinder", parents=[common], help="циклы на цилиндре")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--convention", choices=CONVENTIONS, action="append", default=None)

    p = sub.add_parser("twopoint", parents=[common], help="циклы вокруг двух точек")
    p.add_argument("--z1", type=_complex, default=None)
    p.add_argument("--z2", type=_complex, default=None)
    p.add_argument("--eps", type=float, nargs="+", default=None)
    p.add_argument("--mc", action="store_true", default=None)
    p.add_argument("--samples", type=int, default=None)

    p = sub.add_parser("haar", parents=[common], help="интегрирование по Хаару")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--mode", choices=("quadrature", "mc"), default=None)
    p.add_argument("--samples", type=int, default=None)
    return ap


def run(args: argparse.Namespace):
    lab = DimerLab(data_dir=args.data_dir, config_path=args.config, workers=args.workers)
    try:
        if args.command == "graph":
            report = lab.run_graph(kind=args.kind, spec_path=args.spec, out=args.out, seed=args.seed)
        elif args.command == "sample":
            report = lab.run_sample(graph_path=args.graph, n=args.n, seed=args.seed, out=args.out,
                                    zipper_paths=args.zipper)
        elif args.command == "verify":
            report = lab.run_verify(args.suite, seed=args.seed, out=args.out)
        elif args.command == "cylinder":
            report = lab.run_cylinder(n=args.n, m=args.m, conventions=args.convention,
                                      seed=args.seed, out=args.out)
        elif args.command == "twopoint":
            report = lab.run_twopoint(z1=args.z1, z2=args.z2, eps=args.eps, mc=args.mc, seed=args.seed,
                                      samples=args.samples, out=args.out)
        else:
            report = lab.run_haar(n=args.n, m=args.m, mode=args.mode, samples=args.samples,
                                  seed=args.seed, out=args.out)
        if args.timing:
            lab.save_report(report, report.outputs["report"], include_timing=True)
        lab.show(report)
        return report
    finally:
        lab.stop()


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config and not os.path.exists(args.config):
        ap.error(f"файл настроек не найден: {args.config}")

    setup_logging(args.data_dir)
    try:
        report = run(args)
    except Exception as e:
        print(f"❌ Ошибка выполнения qdimer {args.command}: {e}")
        return 1
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
