#include "bcakit/weyl.hpp"

#include "bcakit/errors.hpp"

#include <functional>
#include <sstream>

namespace bca {

namespace {

void check_beta(const TlfDescriptor& K, const Expvec& beta) {
    if (beta.size() != K.all_dirs().size())
        throw ShapeError("multi-index length does not match the direction count");
    for (auto b : beta)
        if (b < 0) throw ShapeError("negative derivative multiplicity");
}

long long binom(long long n, long long k) {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (long long i = 1; i <= k; ++i) r = r * (n - i + 1) / i;
    return r;
}

LaurentElement derive_multi(const TlfDescriptor& K, LaurentElement x, const Expvec& beta) {
    auto dirs = K.all_dirs();
    for (std::size_t d = 0; d < dirs.size(); ++d)
        for (std::int32_t k = 0; k < beta[d]; ++k) x = x.derive(dirs[d]);
    return x;
}

} // namespace

DiffOp DiffOp::zero(const TlfDescriptor& K) {
    DiffOp d;
    d.K_ = K;
    return d;
}

DiffOp DiffOp::identity(const TlfDescriptor& K) {
    return of_element(LaurentElement::one(K));
}

DiffOp DiffOp::of_element(LaurentElement a) {
    DiffOp d;
    d.K_ = a.tlf();
    Expvec beta(d.K_.all_dirs().size(), 0);
    d.put(beta, a);
    return d;
}

DiffOp DiffOp::partial(const TlfDescriptor& K, const std::string& dir) {
    auto dirs = K.all_dirs();
    Expvec beta(dirs.size(), 0);
    bool found = false;
    for (std::size_t i = 0; i < dirs.size(); ++i)
        if (dirs[i] == dir) {
            beta[i] = 1;
            found = true;
        }
    if (!found) throw ShapeError("unknown direction " + dir);
    return term(LaurentElement::one(K), beta);
}

DiffOp DiffOp::term(LaurentElement a, Expvec beta) {
    DiffOp d;
    d.K_ = a.tlf();
    check_beta(d.K_, beta);
    d.put(beta, a);
    return d;
}

DiffOp DiffOp::from_terms(const TlfDescriptor& K,
                          std::map<Expvec, LaurentElement, LexLess> terms) {
    DiffOp d;
    d.K_ = K;
    for (auto& [beta, a] : terms) {
        check_beta(K, beta);
        if (a.tlf() != K) throw FieldMismatch("coefficient field mismatch");
        d.put(beta, a);
    }
    return d;
}

void DiffOp::put(const Expvec& beta, const LaurentElement& a) {
    auto it = t_.find(beta);
    if (it == t_.end()) {
        if (!(a.is_exact() && a.is_zero())) t_.emplace(beta, a);
        return;
    }
    LaurentElement s = it->second + a;
    if (s.is_exact() && s.is_zero())
        t_.erase(it);
    else
        it->second = s;
}

LaurentElement DiffOp::coeff(const Expvec& beta) const {
    auto it = t_.find(beta);
    return it == t_.end() ? LaurentElement::zero(K_) : it->second;
}

bool DiffOp::is_zero() const {
    for (const auto& [beta, a] : t_)
        if (!(a.is_exact() && a.is_zero())) return false;
    return true;
}

int DiffOp::order() const {
    int r = -1;
    for (const auto& [beta, a] : t_)
        r = std::max(r, static_cast<int>(expvec_total(beta)));
    return r;
}

DiffOp DiffOp::operator+(const DiffOp& o) const {
    if (K_ != o.K_) throw FieldMismatch("operators over different fields");
    DiffOp r = *this;
    for (const auto& [beta, a] : o.t_) r.put(beta, a);
    return r;
}

DiffOp DiffOp::operator-() const {
    DiffOp r = *this;
    for (auto& [beta, a] : r.t_) a = -a;
    return r;
}

DiffOp DiffOp::operator-(const DiffOp& o) const { return *this + (-o); }

DiffOp DiffOp::operator*(const DiffOp& o) const {
    if (K_ != o.K_) throw FieldMismatch("operators over different fields");
    auto dirs = K_.all_dirs();
    DiffOp r = zero(K_);
    for (const auto& [beta, a] : t_) {
        for (const auto& [gamma, b] : o.t_) {
            // Leibniz: a D^beta b D^gamma = sum_{delta<=beta} C(beta,delta)
            //          a D^delta(b) D^{beta-delta+gamma}
            Expvec delta(dirs.size(), 0);
            // depth-first over delta coordinates, reusing partial derivatives
            std::function<void(std::size_t, LaurentElement, long long)> walk =
                [&](std::size_t i, LaurentElement cur, long long c) {
                    if (i == dirs.size()) {
                        Expvec at = expvec_add(expvec_sub(beta, delta), gamma);
                        r.put(at, (a * cur).scale(Scalar::of_int(K_.scalars, c)));
                        return;
                    }
                    for (std::int32_t k = 0; k <= beta[i]; ++k) {
                        delta[i] = k;
                        walk(i + 1, cur, c * binom(beta[i], k));
                        if (k < beta[i]) cur = cur.derive(dirs[i]);
                    }
                    delta[i] = 0;
                };
            walk(0, b, 1);
        }
    }
    return r;
}

DiffOp DiffOp::scale(const LaurentElement& a) const {
    DiffOp r = zero(K_);
    for (const auto& [beta, c] : t_) r.put(beta, a * c);
    return r;
}

DiffOp DiffOp::scale_scalar(const Scalar& c) const {
    DiffOp r = zero(K_);
    for (const auto& [beta, a] : t_) r.put(beta, a.scale(c));
    return r;
}

LaurentElement DiffOp::apply(const LaurentElement& x) const {
    if (x.tlf() != K_) throw FieldMismatch("argument over a different field");
    LaurentElement acc = LaurentElement::zero(K_);
    for (const auto& [beta, a] : t_) acc = acc + a * derive_multi(K_, x, beta);
    return acc;
}

bool DiffOp::operator==(const DiffOp& o) const {
    if (K_ != o.K_) return false;
    auto zero_at = [](const DiffOp& d, const Expvec& beta) {
        auto it = d.t_.find(beta);
        return it == d.t_.end();
    };
    for (const auto& [beta, a] : t_) {
        auto it = o.t_.find(beta);
        if (it == o.t_.end()) {
            if (!(a.is_exact() && a.is_zero())) return false;
        } else if (!(a == it->second)) {
            return false;
        }
    }
    for (const auto& [beta, a] : o.t_)
        if (zero_at(*this, beta) && !(a.is_exact() && a.is_zero())) return false;
    return true;
}

std::string DiffOp::to_string() const {
    if (t_.empty()) return "0";
    auto dirs = K_.all_dirs();
    std::ostringstream os;
    bool first = true;
    // highest multi-index first reads like a polynomial in the D's
    for (auto it = t_.rbegin(); it != t_.rend(); ++it) {
        const auto& [beta, a] = *it;
        std::string dpart;
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            if (beta[i] == 0) continue;
            if (!dpart.empty()) dpart += "*";
            dpart += "D" + dirs[i];
            if (beta[i] != 1) dpart += "^" + std::to_string(beta[i]);
        }
        std::string as = a.to_string();
        bool composite = as.find(' ') != std::string::npos;
        if (!first) os << " + ";
        first = false;
        if (dpart.empty())
            os << (composite ? "(" + as + ")" : as);
        else if (as == "1")
            os << dpart;
        else if (as == "-1")
            os << "-" << dpart;
        else
            os << (composite ? "(" + as + ")" : as) << "*" << dpart;
    }
    return os.str();
}

DiffOp element_commutator(const DiffOp& D, const LaurentElement& a) {
    DiffOp m = DiffOp::of_element(a);
    return D * m - m * D;
}

bool commutator_order_check(const DiffOp& D, const std::vector<LaurentElement>& elts) {
    DiffOp cur = D;
    for (const auto& a : elts) cur = element_commutator(cur, a);
    return cur.is_zero();
}

DiffOp transpose(const DiffOp& D) {
    DiffOp acc = DiffOp::zero(D.tlf());
    for (const auto& [beta, a] : D.terms()) {
        DiffOp p = DiffOp::term(LaurentElement::one(D.tlf()), beta) * DiffOp::of_element(a);
        acc = (expvec_total(beta) % 2) ? acc - p : acc + p;
    }
    return acc;
}

Form right_action(const Form& top, const DiffOp& D) {
    if (top.components().empty()) return top; // degree-agnostic zero
    if (top.tlf() != D.tlf()) throw FieldMismatch("form and operator fields differ");
    if (top.degree() != top.top_degree())
        throw DomainError("right action is defined on top forms");
    auto dirs = D.tlf().all_dirs();
    Form acc = Form::zero(D.tlf(), top.degree());
    for (const auto& [beta, a] : D.terms()) {
        Form w = top.scale(a);
        long long tot = 0;
        for (std::size_t d = 0; d < dirs.size(); ++d)
            for (std::int32_t k = 0; k < beta[d]; ++k) {
                w = lie_derivative(Derivation::along(D.tlf(), dirs[d]), w);
                ++tot;
            }
        acc = (tot % 2) ? acc - w : acc + w;
    }
    return acc;
}

DiffOpMatrix DiffOpMatrix::zeros(const TlfDescriptor& K, int rows, int cols) {
    if (rows < 0 || cols < 0) throw ShapeError("negative matrix dimension");
    DiffOpMatrix m;
    m.K_ = K;
    m.rows_ = rows;
    m.cols_ = cols;
    m.e_.assign(static_cast<std::size_t>(rows) * cols, DiffOp::zero(K));
    return m;
}

DiffOpMatrix DiffOpMatrix::identity(const TlfDescriptor& K, int n) {
    DiffOpMatrix m = zeros(K, n, n);
    for (int i = 0; i < n; ++i) m.set(i, i, DiffOp::identity(K));
    return m;
}

const DiffOp& DiffOpMatrix::at(int i, int j) const {
    if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw ShapeError("matrix index out of range");
    return e_[static_cast<std::size_t>(i) * cols_ + j];
}

void DiffOpMatrix::set(int i, int j, DiffOp d) {
    if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw ShapeError("matrix index out of range");
    if (d.tlf() != K_) throw FieldMismatch("entry over a different field");
    e_[static_cast<std::size_t>(i) * cols_ + j] = std::move(d);
}

DiffOpMatrix DiffOpMatrix::operator+(const DiffOpMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw ShapeError("matrix shapes differ");
    DiffOpMatrix r = *this;
    for (std::size_t i = 0; i < e_.size(); ++i) r.e_[i] = r.e_[i] + o.e_[i];
    return r;
}

DiffOpMatrix DiffOpMatrix::operator-() const {
    DiffOpMatrix r = *this;
    for (auto& d : r.e_) d = -d;
    return r;
}

DiffOpMatrix DiffOpMatrix::operator*(const DiffOpMatrix& o) const {
    if (cols_ != o.rows_) throw ShapeError("matrix shapes do not compose");
    if (K_ != o.K_) throw FieldMismatch("matrices over different fields");
    DiffOpMatrix r = zeros(K_, rows_, o.cols_);
    for (int i = 0; i < rows_; ++i)
        for (int k = 0; k < o.cols_; ++k) {
            DiffOp acc = DiffOp::zero(K_);
            for (int j = 0; j < cols_; ++j) acc = acc + at(i, j) * o.at(j, k);
            r.set(i, k, std::move(acc));
        }
    return r;
}

bool DiffOpMatrix::operator==(const DiffOpMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_ || K_ != o.K_) return false;
    for (std::size_t i = 0; i < e_.size(); ++i)
        if (!(e_[i] == o.e_[i])) return false;
    return true;
}

bool DiffOpMatrix::is_zero() const {
    for (const auto& d : e_)
        if (!d.is_zero()) return false;
    return true;
}

DiffOpMatrix DiffOpMatrix::inverse_unitriangular() const {
    if (rows_ != cols_) throw ShapeError("only square matrices invert");
    DiffOpMatrix n = *this + (-identity(K_, rows_));
    DiffOpMatrix sum = identity(K_, rows_);
    DiffOpMatrix pw = identity(K_, rows_);
    for (int p = 1; p <= rows_; ++p) {
        pw = pw * n;
        if (pw.is_zero()) return sum;
        sum = (p % 2) ? sum + (-pw) : sum + pw;
    }
    throw ShapeError("matrix is not unipotent");
}

} // namespace bca
