from src.schema.catalog import Catalog
from src.schema.declarations import (
    Column,
    ForeignKeyDecl,
    InputTableDecl,
    LocalTableDecl,
    OutputTableDecl,
    SchemaDecl,
    SqlType,
)
from src.schema.parser import load_db_file, parse_db_file, parse_invariant, serialize
from src.schema.validator import Diagnostic, Signature, output_signature, table_signature, validate_schema

__all__ = [
    "Catalog",
    "Column",
    "Diagnostic",
    "ForeignKeyDecl",
    "InputTableDecl",
    "LocalTableDecl",
    "OutputTableDecl",
    "SchemaDecl",
    "Signature",
    "SqlType",
    "load_db_file",
    "output_signature",
    "parse_db_file",
    "parse_invariant",
    "serialize",
    "table_signature",
    "validate_schema",
]
