"""Exception taxonomy shared by the library and the CLI.

Every error the CLI can surface carries a short machine-parsable category
(`config`, `io`, `data`, `artifact`) printed as a single line on failure.
"""


class SalesForestError(Exception):
    """Base class for user-facing errors."""

    category = "data"


class ConfigError(SalesForestError):
    category = "config"


class InputError(SalesForestError):
    """Malformed or missing input files."""

    category = "io"


class DataError(SalesForestError):
    """Inputs parsed fine but violate a domain contract."""

    category = "data"


class ArtifactError(SalesForestError):
    """Missing/invalid intermediate artifact (model file, frame, manifest)."""

    category = "artifact"


class VersionError(ArtifactError):
    """Artifact written by an incompatible format version."""

    def __init__(self, found, supported):
        super().__init__(
            f"unsupported format version {found!r} (this build reads version {supported!r})"
        )
        self.found = found
        self.supported = supported
