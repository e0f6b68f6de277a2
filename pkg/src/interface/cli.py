"""
Punto de entrada de la línea de comandos.

Códigos de salida: 0 éxito, 2 entrada o esquema inválido, 3 métrica indefinida.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from collections.abc import Sequence

from src.core.config import LOG_LEVELS, Settings, load_settings
from src.core.errors import LesionToolkitError
from src.core.metrics.detection import CTP_ALPHA
from src.core.severity import MIN_PROMINENCE, MIN_SEPARATION, TRIM_FRACTION
from src.core.stats import BOOTSTRAP_ITERS, GT_THRESHOLD_PX, PRED_THRESHOLD_PX
from src.infrastructure.run_report import RunReport
from src.interface import commands

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _common_options(settings: Settings) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=settings.jobs, help="workers para trabajo por elemento")
    common.add_argument(
        "--log-level", type=str.upper, choices=LOG_LEVELS, default=settings.log_level
    )
    common.add_argument("--quiet", action="store_true", help="sin barras de progreso ni mensajes")
    common.add_argument("--no-report", action="store_true", help="no escribir <salida>.run.json")
    return common


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="angio-lesion",
        description="Severidad de lesiones coronarias, aumentación piramidal y evaluación.",
    )
    common = _common_options(settings)
    sub = parser.add_subparsers(dest="command", required=True)

    # --- severity ---
    p = sub.add_parser("severity", parents=[common], help="MLD, MAD y DS desde una máscara PNG")
    p.add_argument("--mask", required=True)
    p.add_argument("--context", help="JSON con el CropContext del recorte")
    p.add_argument("--out", required=True)
    p.add_argument("--profile", help="CSV opcional con el perfil de radios (index,x,y,radius)")
    p.add_argument("--min-prominence", type=float, default=MIN_PROMINENCE)
    p.add_argument("--min-separation", type=int, default=MIN_SEPARATION)
    p.add_argument("--trim-fraction", type=float, default=TRIM_FRACTION)
    p.set_defaults(handler=commands.cmd_severity)

    # --- eval-detect ---
    p = sub.add_parser("eval-detect", parents=[common], help="mAP por solapamiento o métricas por MLD")
    p.add_argument("--manifest", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--mode", choices=["overlap", "mld"], default="overlap")
    p.add_argument("--ctp", action="store_true", help="análisis de candidatos a verdadero positivo")
    p.add_argument("--ctp-as-tp", action="store_true", help="agrega métricas con los CTP contados como TP")
    p.add_argument("--alpha", type=float, default=CTP_ALPHA)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=commands.cmd_eval_detect)

    # --- eval-seg ---
    p = sub.add_parser("eval-seg", parents=[common], help="métricas de segmentación por pares de PNG")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--size", type=int, default=256, help="lado de evaluación; 0 = resolución nativa")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=commands.cmd_eval_seg)

    # --- augment ---
    p = sub.add_parser("augment", parents=[common], help="esquema de aumentación en tres niveles")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="JSON con la forma de AugmentConfig")
    p.add_argument("--tiers", default="static", help="lista separada por comas: static,dynamic,composite")
    p.add_argument("--seed", type=int)
    p.add_argument("--epoch", type=int, default=0)
    p.add_argument("--final-epochs", action="store_true", help="desactiva el nivel compuesto")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=commands.cmd_augment)

    # --- agree ---
    p = sub.add_parser("agree", parents=[common], help="acuerdo de MLD predicho vs. referencia")
    p.add_argument("--pairs", required=True, help="CSV con columnas pred_mld,gt_mld")
    p.add_argument("--gt-thresh", type=float, default=GT_THRESHOLD_PX)
    p.add_argument("--pred-thresh", type=float, default=PRED_THRESHOLD_PX)
    p.add_argument("--iters", type=int, default=BOOTSTRAP_ITERS)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", help="CSV de Bland-Altman (mean,diff)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=commands.cmd_agree)

    # --- phantom ---
    p = sub.add_parser("phantom", parents=[common], help="máscara sintética con MLD/MAD conocidos")
    p.add_argument("--kind", choices=["dumbbell", "taper"], default="dumbbell")
    p.add_argument("--bulb-radius", type=int, default=12)
    p.add_argument("--neck-half-width", type=int, default=3)
    p.add_argument("--neck-length", type=int, default=60)
    p.add_argument("--healthy-half-width", type=int, default=8)
    p.add_argument("--narrow-half-width", type=int, default=3)
    p.add_argument("--canvas", type=int, default=0, help="lienzo cuadrado donde centrar el fantoma")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=commands.cmd_phantom)
    return parser


def _setup_logging(level: str) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        settings = load_settings()
    except LesionToolkitError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code

    try:
        args = build_parser(settings).parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _setup_logging(args.log_level)
    if args.jobs < 1:
        logger.error("--jobs debe ser >= 1")
        return 2

    report = RunReport(command=args.command)
    start = time.perf_counter()
    try:
        code = args.handler(args, settings, report)
    except LesionToolkitError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code

    report.wall_time = time.perf_counter() - start
    if not args.no_report and report.outputs:
        report.write(args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
