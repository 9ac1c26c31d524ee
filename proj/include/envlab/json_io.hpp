#pragma once

#include "envlab/derivation.hpp"
#include "envlab/envariance.hpp"
#include "envlab/nosignal.hpp"
#include "envlab/protocol.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace envlab {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Parses JSON text; syntax errors become ValidationError with
// "<source>:<line>:<column>" context.
Json parse_json(std::string_view text, std::string_view source = "<input>");
Json read_json_file(const std::string& path);

// Doubles are emitted in shortest round-trip form.
std::string dump_json(const Json& j);

Json rational_to_json(const Rational& q);
Rational rational_from_json(const Json& j);

Json matrix_to_json(const CMatrix& m);  // rows of [re, im] pairs
CMatrix matrix_from_json(const Json& j);

Json state_to_json(const PureState& state);
PureState state_from_json(const Json& j, const Config& config = {});

Json unitary_to_json(const LocalUnitary& u);
LocalUnitary unitary_from_json(const Json& j, const Tolerances& tol = {});

Json schmidt_to_json(const SchmidtForm& form);
Json verdict_to_json(const EnvarianceVerdict& verdict);

Json constraint_to_json(const Constraint& c);
Constraint constraint_from_json(const Json& j);
Json ledger_to_json(const ConstraintLedger& ledger);
ConstraintLedger ledger_from_json(const Json& j);

// Steps carry the constraints the ledger attributes to them.
Json trace_to_json(const ProtocolTrace& trace, const Ruleset& ruleset, const ConstraintLedger& ledger);

Json ruleset_to_json(const Ruleset& ruleset);
Ruleset ruleset_from_json(const Json& j);

Json certificate_to_json(const DerivationCertificate& cert);
Json report_to_json(const SignallingReport& report);

}  // namespace envlab
