/** Error taxonomy mirrored into exit codes by the CLI. */

export class MissingArtifact extends Error {
  readonly kind = "missing-artifact";
}

export class SchemaMismatch extends Error {
  readonly kind = "schema-mismatch";
}
