import csv
import json
from importlib.resources import files
from typing import Any, List

import yaml


def get_resource_file_path(file_name: str) -> str:
    return str(files("tests") / "res" / file_name)


def get_resource_file_content(file_name: str) -> str:
    with open(
        get_resource_file_path(file_name),
        mode="rt",
        encoding="utf8",
    ) as source:
        return source.read()


def get_file_json(file_name) -> Any:
    return json.loads(get_resource_file_content(file_name))


def get_file_yaml(file_name) -> Any:
    return yaml.safe_load(get_resource_file_content(file_name))


def read_file(file_path) -> str:
    with open(file_path, mode="rt", encoding="utf8") as source:
        return source.read()


def read_rows(file_path) -> List[List[str]]:
    with open(file_path, mode="rt", encoding="utf8", newline="") as source:
        return list(csv.reader(source))


def output_path(name: str) -> str:
    return f"_test_files/{name}"
