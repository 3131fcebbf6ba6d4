#pragma once

// Canonical textual rendering shared by the CLI and the verification
// reports.  Elements and operators already print in the expression grammar
// through their to_string(); forms need a variant that stays re-parseable
// (coefficient, then a wedge block of d-atoms).  Windowed coefficients keep
// their O(...) tail and are display-only.

#include "bca.hpp"
#include "forms.hpp"
#include "weyl.hpp"

#include <string>

namespace bca {

std::string render_element(const LaurentElement& x);
std::string render_form(const Form& a);
std::string render_op(const DiffOp& d);
std::string render_derivation(const Derivation& d);

// declaration syntax accepted back by eval:
//   bca A over Q(s) vars t,w ideal t^2,t*w,w^3
//   ... ; sigma s -> s + t
std::string render_bca_decl(const std::string& name, const ArtinianBca& A);
std::string render_decl(const std::string& name, const ArtinianBca& A, const CoeffField& sigma);

} // namespace bca
