"""Exception hierarchy. ``DataError`` subclasses map to CLI exit code 2."""


class VrdForgeError(Exception):
    pass


class ConfigError(VrdForgeError, ValueError):
    """A configuration value outside its allowed domain."""


class DataError(VrdForgeError):
    pass


class CorpusError(DataError):
    pass


class EmptyCorpusError(CorpusError):
    pass


class FontLoadError(DataError):
    pass


class RenderError(DataError):
    pass


class StyleSpaceError(ConfigError):
    """Color sampling could not satisfy the contrast threshold."""


class GenerationError(DataError):
    def __init__(self, index, cause):
        super().__init__(f"sample {index}: {cause}")
        self.index = index
        self.cause = cause


class MetricError(DataError, ValueError):
    pass


class AnnotationFormatError(DataError):
    pass


class AnnotationReferenceError(DataError):
    pass


class JoinError(DataError):
    def __init__(self, message, offenders):
        super().__init__(f"{message}: {', '.join(map(str, offenders))}")
        self.offenders = list(offenders)


class UnsupportedPresetError(ConfigError):
    pass


class PresetRunError(DataError):
    def __init__(self, preset, cause):
        super().__init__(f"preset {preset!r}: {cause}")
        self.preset = preset
        self.cause = cause
