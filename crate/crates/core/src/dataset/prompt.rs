//! Generation prompt for producing a new category with a chat model.

use super::{Dataset, DatasetError};

const PROMPT_TEXT: &str = r#"Data is to be generated according to the provided JSON schema. Please follow the schema exactly. There is also an example in JSON format provided. In the example the {class_category} is "novelists". Now based on the JSON schema and the example, please create data for a {class_category} "desired class category". There should be at least 5 {candidate_classes} in this category. Ensure that each of the {candidate_classes} has exactly the same number of tokens - this includes the punctuation, the space at the beginning of a class and the full stop at the end. The number of tokens should be at most 3 - use as few tokens as possible. If the {class_category} is a proper noun, then the first letter of each word of the class should be capitalized. If the {class_category} is not a proper noun then the first letter of each word should not be capitalized. There should be at least 3 {histories}, varying in how related they are to the {class_category} (from completely unrelated to very related). There should be at least 20 pieces of {evidence_text}. Some pieces of the evidence text should provide high evidence for one of the classes, other pieces of evidence text should provide evidence for several or all of the candidate classes and some pieces of evidence text should provide evidence for none of the candidate classes. Each {evidence_text} should be accompanied by an array {points_to_classes}, which is a list of classes in {class_category} that the evidence supports. This could be a single class, more than one class, all classes in the {class_category} or none (i.e. an empty list). The {evidence_elicitation} joined with the {evidence_text} should form a grammatically correct sentence including spaces and punctuation. The {class_elicitation} joined with each {class} should form a grammatically correct sentence including spaces and punctuation. It is important to follow the example for {class_elicitation} and {evidence_elicitation} including spaces and other punctuation. "desired class category" = "#;

const JSON_SCHEMA: &str = r#"{
  "schema": "https://json-schema.org/draft/2020-12/schema",
  "type": "object",
  "properties": {
    "bayesian_reasoning": {
      "type": "array",
      "items": {
        "type": "object",
        "properties": {
          "conversation_history": {
            "type": "string",
            "description": "the conversation history"
          },
          "candidate_classes": {
            "type": "array",
            "items": {
              "type": "string"
            },
            "minItems": 2,
            "uniqueItems": true,
            "description": "list of candidate classes"
          },
          "evidence": {
            "type": "string",
            "description": "justification or rationale for the classification"
          },
          "class_elicitation": {
            "type": "string",
            "description": "prompt used to elicit a candidate class"
          },
          "evidence_elicitation": {
            "type": "string",
            "description": "prompt used to elicit the evidence"
          }
        },
        "required": [
          "conversation_history",
          "candidate_classes",
          "evidence",
          "class_elicitation",
          "evidence_elicitation"
        ]
      }
    }
  },
  "required": ["bayesian_reasoning"]
}"#;

/// Prompt text for `category_name`, then the JSON schema, then the exemplar
/// serialized in normalized form. Output is byte-stable for fixed inputs.
pub fn emit_generation_prompt(
    category_name: &str,
    exemplar: &Dataset,
) -> Result<String, DatasetError> {
    if category_name.is_empty() {
        return Err(DatasetError::EmptyCategoryName);
    }
    let mut out = String::with_capacity(PROMPT_TEXT.len() + JSON_SCHEMA.len() + 4096);
    out.push_str(PROMPT_TEXT);
    out.push('"');
    out.push_str(category_name);
    out.push_str("\"\n\nJSON schema:\n");
    out.push_str(JSON_SCHEMA);
    out.push_str("\n\nExample:\n");
    out.push_str(&exemplar.to_json_pretty());
    out.push('\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::EXEMPLAR;
    use super::super::*;

    #[test]
    fn substitutes_category() {
        let ds = load_dataset_str(EXEMPLAR).unwrap();
        let text = emit_generation_prompt("school_of_philosophy", &ds).unwrap();
        assert!(text.contains(r#""desired class category" = "school_of_philosophy""#));
        assert_eq!(
            text,
            emit_generation_prompt("school_of_philosophy", &ds).unwrap()
        );
    }

    #[test]
    fn embeds_exemplar_verbatim() {
        let ds = load_dataset_str(EXEMPLAR).unwrap();
        let text = emit_generation_prompt("novelists", &ds).unwrap();
        assert!(text.contains(&ds.to_json_pretty()));
        assert!(text.contains("\"required\": [\"bayesian_reasoning\"]"));
    }

    #[test]
    fn rejects_empty_name() {
        let ds = load_dataset_str(EXEMPLAR).unwrap();
        assert!(matches!(
            emit_generation_prompt("", &ds),
            Err(DatasetError::EmptyCategoryName)
        ));
    }
}
