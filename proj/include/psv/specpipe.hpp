#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "psv/common.hpp"

/// Brace/fence/keyword-level processing of specification text. Nothing in
/// here parses the verification language; semantic checks belong to the
/// verifier.
namespace psv::specpipe {

class SpecError : public Error {
 public:
  using Error::Error;
};

/// Contents of ``` fenced blocks in order of appearance. An unterminated
/// final fence yields everything after it as one block.
std::vector<std::string> extract_code_blocks(std::string_view text);

/// First fenced block, or an empty string when there is none.
std::string first_code_block(std::string_view text);

/// A specification split into retained helper items and the target
/// function header (ending at its opening brace).
struct SpecParts {
  std::vector<std::string> helpers;
  std::string target_header;
  std::string target_name;
};

/// Locates the target function in arbitrary candidate source. Unwraps a
/// `verus! { ... }` block, drops the vstd prelude import and any
/// external-body attribute on the target, and strips a body if present.
SpecParts split_spec(std::string_view block);

/// Specification text: helpers followed by the target header, ending at
/// the target's opening brace. Throws SpecError.
std::string extract_spec(std::string_view block);

/// Dedup key: comments stripped, whitespace runs collapsed to one space,
/// trimmed. Identifiers are left alone.
std::string normalize(std::string_view spec_text);

/// Wraps a specification into a program the verifier can check without an
/// implementation: prelude, external-body attribute, vacuous body.
std::string make_stub(std::string_view spec_text);

/// Body text between the target function's braces in a complete program.
/// Throws SpecError when the target has no closed body.
std::string extract_body(std::string_view program);

/// Complete program from a spec plus a body, laid out like a stub.
std::string assemble_program(std::string_view spec_text, std::string_view body);

}  // namespace psv::specpipe
