import traceback
from datetime import datetime
from zoneinfo import ZoneInfo

from config.settings import settings

partition_text = "{value:.12g}"

partition_complex_text = "{real:.12g} {imag:+.12g}i"

rate_csv_header = "x,rate,argmax_t"

sample_csv_header = "replica,index,point,log_density"

domain_error_text = "Ошибка области определения: {error}"

check_failed_text = "Ошибка: {error}"

experiment_summary_text = (
    "Эксперимент {label}, n={n}, beta={beta:g}, реплик {replicas}\n"
    "KS (асимптотическая центровка): {ks}\n"
    "KS (точная центровка): {ks_exact:.4f}\n"
    "Проверки: {flags}\n"
    "Итог: {verdict}"
)

experiment_files_text = "Отчет: {json_path}\nДанные по репликам: {csv_path}"

experiment_recorded_text = "Запуск сохранен в реестре под номером {run_id}"

verify_row_text = "{name:<32} {value:>14} {tolerance:>10.1e}  {status}"

verify_header_text = f"{'проверка':<32} {'погрешность':>14} {'допуск':>10}  статус"

runs_row_text = (
    "#{id:<5} {created_at}  {ensemble:<16} n={n:<8} beta={beta:<5g} m={replicas:<8} "
    "{statistic:<15} {verdict}"
)

no_runs_text = "Реестр запусков пуст"

passed_text = "пройден"

failed_text = "не пройден"


def format_value(value: float | None) -> str:
    if value is None:
        return "-"
    return f"{value:.3e}"


def format_rate(value: float) -> str:
    """Значение функции скорости для CSV; бесконечность - литерал +inf."""
    if value == float("inf"):
        return "+inf"
    return f"{value:.9f}"


def prepare_error_caption(e: Exception) -> str:
    """Генерирует краткое описание ошибки из исключения."""
    tb = traceback.extract_tb(e.__traceback__)
    last_frame = tb[-1] if tb else None
    location = (
        f"{last_frame.filename}:{last_frame.lineno} ({last_frame.name})"
        if last_frame
        else "unknown location"
    )
    timestamp = datetime.now(ZoneInfo(settings.LOG_TIMEZONE)).strftime(
        "%Y-%m-%d %H:%M:%S"
    )

    return (
        f"Ошибка\n"
        f"время: {timestamp}\n"
        f"тип: {type(e).__name__}\n"
        f"сообщение: {str(e)}\n"
        f"место: {location}"
    )
