use super::{GatewayError, ToolGateway, ToolSpec};
use crate::store::RelationalTable;

impl ToolGateway {
    /// Submits each input row's `submit_schema` columns to the tool and
    /// collects the projected `extract_fields` of every answer row.
    pub fn extract(&self, spec: &ToolSpec, input: &RelationalTable) -> Result<RelationalTable, GatewayError> {
        let tool = self
            .tools
            .get(&spec.name)
            .ok_or_else(|| GatewayError::unavailable(&spec.name, "not registered"))?;
        let submit_idx = spec
            .submit_schema
            .iter()
            .map(|c| {
                input.column_index(c).ok_or_else(|| GatewayError::SchemaMismatch {
                    tool: spec.name.clone(),
                    field: c.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut rows = Vec::new();
        match &tool.data {
            Some(data) => {
                let field_idx = spec
                    .extract_fields
                    .iter()
                    .map(|f| {
                        data.header()
                            .iter()
                            .skip(data.key_width())
                            .position(|h| h == f)
                            .map(|i| i + data.key_width())
                            .ok_or_else(|| GatewayError::SchemaMismatch {
                                tool: spec.name.clone(),
                                field: f.clone(),
                            })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                for row in &input.rows {
                    let key: Vec<String> = submit_idx.iter().map(|&i| row[i].clone()).collect();
                    for hit in data.rows_for(&key) {
                        rows.push(field_idx.iter().map(|&i| hit.get(i).cloned().unwrap_or_default()).collect());
                    }
                }
            }
            None => {
                for row in &input.rows {
                    let submit: Vec<(String, String)> = spec
                        .submit_schema
                        .iter()
                        .zip(&submit_idx)
                        .map(|(c, &i)| (c.clone(), row[i].clone()))
                        .collect();
                    for rec in self.call_remote(spec, &submit)? {
                        let projected = spec
                            .extract_fields
                            .iter()
                            .map(|f| {
                                rec.get(f).cloned().ok_or_else(|| GatewayError::SchemaMismatch {
                                    tool: spec.name.clone(),
                                    field: f.clone(),
                                })
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        rows.push(projected);
                    }
                }
            }
        }
        Ok(RelationalTable {
            name: spec.name.clone(),
            columns: spec.extract_fields.clone(),
            rows,
        })
    }
}
