"""Tests for halphen.config module."""

import os
from pathlib import Path
from unittest.mock import patch

import pytest

from halphen.config import DEFAULT_DB_PATH, DEFAULT_MAX_TERMS, get_db_path, get_max_terms
from halphen.errors import ParameterError
from halphen.modular_forms import default_series_params


def test_max_terms_default():
    with patch.dict(os.environ, {}, clear=True):
        assert get_max_terms() == DEFAULT_MAX_TERMS


def test_max_terms_env_override():
    with patch.dict(os.environ, {"HALPHEN_MAX_TERMS": "64"}):
        assert get_max_terms() == 64
        assert default_series_params().max_terms == 64


@pytest.mark.parametrize("value", ["abc", "0", "-3", "1.5"])
def test_max_terms_env_invalid(value):
    with patch.dict(os.environ, {"HALPHEN_MAX_TERMS": value}):
        with pytest.raises(ParameterError):
            get_max_terms()


def test_parameter_error_is_value_error():
    with patch.dict(os.environ, {"HALPHEN_MAX_TERMS": "nope"}):
        with pytest.raises(ValueError):
            get_max_terms()


def test_db_path_default():
    with patch.dict(os.environ, {}, clear=True):
        assert get_db_path() == DEFAULT_DB_PATH


def test_db_path_env_override(tmp_path):
    with patch.dict(os.environ, {"HALPHEN_DB": str(tmp_path / "runs.db")}):
        assert get_db_path() == Path(tmp_path / "runs.db")
