import json
from pathlib import Path
from typing import Any, Dict, List

from covkit.errors import CovKitError

from .configuration import logger

SCHEMA_DIR = Path(__file__).parent / 'schemas'

_TYPE_CHECKS = {
    'object': lambda v: isinstance(v, dict),
    'array': lambda v: isinstance(v, list),
    'string': lambda v: isinstance(v, str),
    'boolean': lambda v: isinstance(v, bool),
    'integer': lambda v: isinstance(v, int) and not isinstance(v, bool),
    'number': lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    'null': lambda v: v is None,
}


def load_schema(name: str) -> Dict[str, Any]:
    with open(SCHEMA_DIR / f"{name}.schema.json", 'r', encoding='utf-8') as handle:
        return json.load(handle)


class ResultSchemaError(CovKitError):
    """A result document does not match its shipped schema."""
    error_type = "ResultSchemaError"

    def __init__(self, schema_name: str, errors: List[str]):
        super().__init__(f"{schema_name} document failed validation: {'; '.join(errors)}")
        self.errors = errors


class ResultValidator:
    """
    Checks a JSON result document against one of the shipped schemas.

    Supports the schema keywords the shipped schemas use: type, required,
    properties, additionalProperties and items.
    """

    def __init__(self, schema_name: str):
        self.schema_name = schema_name
        self.schema = load_schema(schema_name)
        self.REQUIRED_KEYS = self.schema.get('required', [])
        self.VALID_KEYS = list(self.schema.get('properties', {}).keys())

    def validate(self, document: dict) -> list:
        """Validate a document and return a list of validation errors."""
        errors = self._validate_node(document, self.schema, self.schema_name)
        if errors:
            logger.warning(f"{self.schema_name} document failed validation: {errors}")
        return errors

    def check(self, document: dict) -> None:
        """Raise ResultSchemaError when the document does not validate."""
        errors = self.validate(document)
        if errors:
            raise ResultSchemaError(self.schema_name, errors)

    def _validate_node(self, value: Any, schema: Dict[str, Any], where: str) -> List[str]:
        errors = []
        expected = schema.get('type')
        if expected is not None:
            allowed = expected if isinstance(expected, list) else [expected]
            if not any(_TYPE_CHECKS[kind](value) for kind in allowed):
                return [f"'{where}' should be {' or '.join(allowed)}, got {type(value).__name__}"]

        if isinstance(value, dict):
            properties = schema.get('properties', {})
            for key in schema.get('required', []):
                if key not in value:
                    errors.append(f"Missing required key '{key}' in '{where}'")
            for key, item in value.items():
                if key in properties:
                    errors.extend(self._validate_node(item, properties[key], f"{where}.{key}"))
                elif schema.get('additionalProperties', True) is False:
                    errors.append(f"Invalid key '{key}' in '{where}'")

        if isinstance(value, list) and 'items' in schema:
            for index, item in enumerate(value):
                errors.extend(self._validate_node(item, schema['items'], f"{where}[{index}]"))
        return errors
