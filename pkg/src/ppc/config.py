"""Pipeline configuration: one JSON document, env overrides, role resolution.

Precedence is file < environment < command-line flags. Endpoints resolve per
role (preplan_gen, plan_gen, executor, cleanup, judge, policy) from either
the config file or PPC_* environment variables; a role may also point at a
scripted response file for fully offline runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .clients import HttpChatClient, LlmClient, RetryPolicy, ScriptedClient
from .grpo import GrpoConfig
from .rewards import RewardWeights
from .spoiler import DEFAULT_LENGTH_BOUNDS, SpoilerConfig

ROLE_NAMES = ("preplan_gen", "plan_gen", "executor", "cleanup", "judge", "policy")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RoleConfig:
    kind: str = "http"  # "http" or "scripted"
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "PPC_API_KEY"
    script: str | None = None
    default_response: str | None = None
    max_attempts: int = 3
    timeout: float = 120.0

    def __post_init__(self):
        if self.kind not in ("http", "scripted"):
            raise ConfigError(f"unknown role kind {self.kind!r}")
        if self.kind == "scripted" and not self.script and self.default_response is None:
            raise ConfigError("scripted role needs a script file or default_response")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "model": self.model,
            "api_key_env": self.api_key_env,
            "script": self.script,
            "default_response": self.default_response,
            "max_attempts": self.max_attempts,
            "timeout": self.timeout,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoleConfig":
        return cls(**data)


@dataclass
class PipelineConfig:
    roles: dict[str, RoleConfig] = field(default_factory=dict)
    temperature: float = 1.0
    top_p: float = 0.95
    max_tokens: int = 4096
    spoiler: SpoilerConfig = field(default_factory=SpoilerConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    grpo: GrpoConfig | None = None
    filter_min_tokens: int = DEFAULT_LENGTH_BOUNDS[0]
    filter_max_tokens: int = DEFAULT_LENGTH_BOUNDS[1]
    parallelism: int = 1
    seed: int | None = None

    def __post_init__(self):
        for name in self.roles:
            if name not in ROLE_NAMES:
                raise ConfigError(f"unknown role {name!r}; valid: {ROLE_NAMES}")

    @property
    def length_bounds(self) -> tuple[int, int]:
        return (self.filter_min_tokens, self.filter_max_tokens)

    def to_dict(self) -> dict:
        return {
            "roles": {name: rc.to_dict() for name, rc in sorted(self.roles.items())},
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "spoiler": self.spoiler.to_dict(),
            "weights": self.weights.to_dict(),
            "grpo": self.grpo.to_dict() if self.grpo else None,
            "filter_min_tokens": self.filter_min_tokens,
            "filter_max_tokens": self.filter_max_tokens,
            "parallelism": self.parallelism,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineConfig":
        data = dict(data)
        roles = {
            name: RoleConfig.from_dict(rc)
            for name, rc in (data.get("roles") or {}).items()
        }
        grpo_data = data.get("grpo")
        grpo = None
        if grpo_data is not None:
            # No silent hyperparameter drift: config files must pin both.
            for key in ("epsilon_clip", "beta_kl"):
                if key not in grpo_data:
                    raise ConfigError(f"grpo config must set {key!r} explicitly")
            grpo = GrpoConfig.from_dict(grpo_data)
        try:
            spoiler = SpoilerConfig.from_dict(data.get("spoiler") or {})
            weights = RewardWeights.from_dict(data.get("weights") or {})
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(
            roles=roles,
            temperature=data.get("temperature", 1.0),
            top_p=data.get("top_p", 0.95),
            max_tokens=data.get("max_tokens", 4096),
            spoiler=spoiler,
            weights=weights,
            grpo=grpo,
            filter_min_tokens=data.get("filter_min_tokens", DEFAULT_LENGTH_BOUNDS[0]),
            filter_max_tokens=data.get("filter_max_tokens", DEFAULT_LENGTH_BOUNDS[1]),
            parallelism=data.get("parallelism", 1),
            seed=data.get("seed"),
        )

    @classmethod
    def from_file(cls, path: Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _env_for_role(env: Mapping[str, str], role: str, suffix: str) -> str | None:
    return env.get(f"PPC_{role.upper()}_{suffix}") or env.get(f"PPC_{suffix}")


def _load_script(path: Path):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        return data  # exact prompt -> response map
    if isinstance(data, list):
        return [(row["match"], row["response"]) for row in data]
    raise ConfigError(f"script file {path} must hold a JSON object or array")


def build_client(
    config: PipelineConfig,
    role: str,
    env: Mapping[str, str],
    base_dir: Path | None = None,
) -> LlmClient:
    """Resolve one role to a client; environment overrides the file.

    PPC_<ROLE>_ENDPOINT / PPC_<ROLE>_MODEL / PPC_<ROLE>_API_KEY take
    precedence over the global PPC_ENDPOINT / PPC_MODEL / PPC_API_KEY,
    which in turn override the config file entry.
    """
    if role not in ROLE_NAMES:
        raise ConfigError(f"unknown role {role!r}")
    rc = config.roles.get(role, RoleConfig())

    if rc.kind == "scripted":
        script: object = {}
        if rc.script:
            script_path = Path(rc.script)
            if base_dir is not None and not script_path.is_absolute():
                script_path = Path(base_dir) / script_path
            script = _load_script(script_path)
        return ScriptedClient(script, default=rc.default_response, name=role)

    endpoint = _env_for_role(env, role, "ENDPOINT") or rc.endpoint
    model = _env_for_role(env, role, "MODEL") or rc.model
    api_key = _env_for_role(env, role, "API_KEY") or env.get(rc.api_key_env)
    if not endpoint or not model:
        raise ConfigError(
            f"role {role!r} has no endpoint/model (config file or PPC_* env vars)"
        )
    return HttpChatClient(
        endpoint=endpoint,
        model=model,
        api_key=api_key,
        timeout=rc.timeout,
        retry=RetryPolicy(max_attempts=rc.max_attempts),
    )
