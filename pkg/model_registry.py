#!/usr/bin/env python3
"""
Model Registry - Central Source of Truth for Homogenization Problems

Every model lives in models/<name>.json, either as a full problem spec or
as a builder recipe {"builder": ..., "parameters": {...}}. All scripts
resolve models through here.

Usage:
    from model_registry import get_all_models, get_model_by_id, resolve_model

    problem = resolve_model('scalar-1d-sine')
    problem = resolve_model({'builder': 'constant', 'parameters': {'value': 2.0}})
"""

import json
import os
import re
import unicodedata
from typing import Dict, Iterator, List, Optional, Union

from homog.errors import ConfigError
from homog.model_zoo import ProblemSpec, problem_from_dict

_MODELS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'models')
_cache: Dict[str, Dict] = {}
_problems: Dict[str, ProblemSpec] = {}


def _load_registry() -> Dict[str, Dict]:
    global _cache
    if not _cache:
        if not os.path.isdir(_MODELS_DIR):
            raise ConfigError(f"Models directory not found: {_MODELS_DIR}")
        for filename in sorted(os.listdir(_MODELS_DIR)):
            if not filename.endswith('.json'):
                continue
            path = os.path.join(_MODELS_DIR, filename)
            with open(path, 'r', encoding='utf-8') as f:
                try:
                    data = json.load(f)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
            model_id = filename[:-len('.json')]
            data.setdefault('name', model_id)
            _cache[model_id] = data
    return _cache


def clear_cache() -> None:
    _cache.clear()
    _problems.clear()


def normalize_model_name(name: str) -> str:
    """Normalize a model name for matching: ASCII, lowercase, '-' separators."""
    name = unicodedata.normalize('NFKD', name).encode('ASCII', 'ignore').decode('ASCII')
    name = re.sub(r'[^a-z0-9]+', '-', name.lower())
    return re.sub(r'-+', '-', name).strip('-')


def get_model_ids() -> List[str]:
    """Get list of all model IDs."""
    return sorted(_load_registry())


def get_all_models() -> List[Dict]:
    """Get every raw model record (spec or recipe)."""
    return [_load_registry()[model_id] for model_id in get_model_ids()]


def get_model_record(model_id: str) -> Optional[Dict]:
    return _load_registry().get(normalize_model_name(model_id))


def get_model_by_id(model_id: str) -> Optional[ProblemSpec]:
    """Build (once) the ProblemSpec registered under model_id."""
    key = normalize_model_name(model_id)
    if key not in _problems:
        record = _load_registry().get(key)
        if record is None:
            return None
        _problems[key] = problem_from_dict(record)
    return _problems[key]


def get_models_by_tag(tag: str) -> List[ProblemSpec]:
    """Get all models carrying a tag (zero-corrector, laminate, ...)."""
    problems = [get_model_by_id(model_id) for model_id in get_model_ids()]
    return [p for p in problems if tag in p.tags]


def iter_models() -> Iterator[ProblemSpec]:
    for model_id in get_model_ids():
        yield get_model_by_id(model_id)


def resolve_model(model: Union[str, Dict]) -> ProblemSpec:
    """A registered model name, a path to a JSON file, or an inline spec dict."""
    if isinstance(model, dict):
        return problem_from_dict(model)
    if model.endswith('.json') and os.path.exists(model):
        with open(model, 'r', encoding='utf-8') as f:
            return problem_from_dict(json.load(f))
    problem = get_model_by_id(model)
    if problem is None:
        raise ConfigError(f"Unknown model {model!r}; registered: {', '.join(get_model_ids())}")
    return problem


if __name__ == '__main__':
    print("Model Registry Summary")
    print("=" * 50)
    print(f"Models directory: {_MODELS_DIR}")
    print(f"Total models: {len(get_model_ids())}")

    print("\nModels:")
    for problem in iter_models():
        tags = ', '.join(problem.tags) or '-'
        print(f"  [{problem.dim}D n={problem.n}] {problem.name}  ({tags})")
