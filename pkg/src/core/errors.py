"""Jerarquía de errores del toolkit.

Las subclases de `InputError` corresponden al código de salida 2 de la CLI;
`UndefinedMetricError` al código 3.
"""


class LesionToolkitError(Exception):
    """Error base de todo el paquete."""

    exit_code: int = 1


class InputError(LesionToolkitError):
    """Entrada inválida (archivo, esquema, máscara o parámetros)."""

    exit_code = 2


class DegenerateCropError(InputError):
    pass


class EmptyMaskError(InputError):
    pass


class DegenerateMaskError(InputError):
    pass


class DimensionMismatchError(InputError):
    pass


class UnknownImageError(InputError):
    pass


class MissingMldPointError(InputError):
    pass


class EmptySampleError(InputError):
    pass


class LengthMismatchError(InputError):
    pass


class InvalidTierError(InputError):
    pass


class InsufficientSamplesError(InputError):
    pass


class SchemaError(InputError):
    pass


class ConfigError(InputError):
    pass


class UndefinedMetricError(LesionToolkitError):
    """Métrica indefinida (denominador cero o clase única)."""

    exit_code = 3
