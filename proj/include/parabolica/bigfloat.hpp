#pragma once

#include <mpfr.h>

#include <cstdint>
#include <string>
#include <utility>

namespace parabolica {

/// Arbitrary-precision real backed by MPFR. The mantissa width is a
/// per-thread default set with BigFloat::set_default_precision; every
/// freshly constructed value picks it up, so a whole kernel can be switched
/// to N bits by setting it once before building the expression tree.
class BigFloat {
  public:
    BigFloat() { mpfr_init2(v_, default_precision()); mpfr_set_zero(v_, 1); }
    BigFloat(double x) { mpfr_init2(v_, default_precision()); mpfr_set_d(v_, x, MPFR_RNDN); }
    BigFloat(int x) : BigFloat(static_cast<double>(x)) {}
    BigFloat(long x) { mpfr_init2(v_, default_precision()); mpfr_set_si(v_, x, MPFR_RNDN); }
    explicit BigFloat(const std::string& s) {
        mpfr_init2(v_, default_precision());
        mpfr_set_str(v_, s.c_str(), 10, MPFR_RNDN);
    }

    BigFloat(const BigFloat& o) { mpfr_init2(v_, mpfr_get_prec(o.v_)); mpfr_set(v_, o.v_, MPFR_RNDN); }
    BigFloat(BigFloat&& o) noexcept { mpfr_init2(v_, default_precision()); mpfr_swap(v_, o.v_); }
    BigFloat& operator=(const BigFloat& o) {
        if (this != &o) { mpfr_set_prec(v_, mpfr_get_prec(o.v_)); mpfr_set(v_, o.v_, MPFR_RNDN); }
        return *this;
    }
    BigFloat& operator=(BigFloat&& o) noexcept { mpfr_swap(v_, o.v_); return *this; }
    ~BigFloat() { mpfr_clear(v_); }

    static mpfr_prec_t& default_precision() {
        thread_local mpfr_prec_t prec = 128;
        return prec;
    }
    static void set_default_precision(mpfr_prec_t bits) { default_precision() = bits; }

    double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
    explicit operator double() const { return to_double(); }

    mpfr_ptr raw() { return v_; }
    mpfr_srcptr raw() const { return v_; }

    friend BigFloat operator+(const BigFloat& a, const BigFloat& b) { return binop(mpfr_add, a, b); }
    friend BigFloat operator-(const BigFloat& a, const BigFloat& b) { return binop(mpfr_sub, a, b); }
    friend BigFloat operator*(const BigFloat& a, const BigFloat& b) { return binop(mpfr_mul, a, b); }
    friend BigFloat operator/(const BigFloat& a, const BigFloat& b) { return binop(mpfr_div, a, b); }
    friend BigFloat operator-(const BigFloat& a) {
        BigFloat r; mpfr_neg(r.v_, a.v_, MPFR_RNDN); return r;
    }
    BigFloat& operator+=(const BigFloat& o) { mpfr_add(v_, v_, o.v_, MPFR_RNDN); return *this; }
    BigFloat& operator-=(const BigFloat& o) { mpfr_sub(v_, v_, o.v_, MPFR_RNDN); return *this; }
    BigFloat& operator*=(const BigFloat& o) { mpfr_mul(v_, v_, o.v_, MPFR_RNDN); return *this; }
    BigFloat& operator/=(const BigFloat& o) { mpfr_div(v_, v_, o.v_, MPFR_RNDN); return *this; }

    friend bool operator<(const BigFloat& a, const BigFloat& b) { return mpfr_less_p(a.v_, b.v_) != 0; }
    friend bool operator>(const BigFloat& a, const BigFloat& b) { return mpfr_greater_p(a.v_, b.v_) != 0; }
    friend bool operator<=(const BigFloat& a, const BigFloat& b) { return mpfr_lessequal_p(a.v_, b.v_) != 0; }
    friend bool operator>=(const BigFloat& a, const BigFloat& b) { return mpfr_greaterequal_p(a.v_, b.v_) != 0; }
    friend bool operator==(const BigFloat& a, const BigFloat& b) { return mpfr_equal_p(a.v_, b.v_) != 0; }
    friend bool operator!=(const BigFloat& a, const BigFloat& b) { return !(a == b); }

    friend BigFloat abs(const BigFloat& a) { return unop(mpfr_abs, a); }
    friend BigFloat sqrt(const BigFloat& a) { return unop(mpfr_sqrt, a); }
    friend BigFloat cbrt(const BigFloat& a) { return unop(mpfr_cbrt, a); }
    friend BigFloat log(const BigFloat& a) { return unop(mpfr_log, a); }
    friend BigFloat exp(const BigFloat& a) { return unop(mpfr_exp, a); }
    friend BigFloat floor(const BigFloat& a) {
        BigFloat r; mpfr_floor(r.v_, a.v_); return r;
    }
    friend BigFloat pow(const BigFloat& a, const BigFloat& b) { return binop(mpfr_pow, a, b); }
    friend BigFloat pow(const BigFloat& a, long n) {
        BigFloat r; mpfr_pow_si(r.v_, a.v_, n, MPFR_RNDN); return r;
    }
    friend BigFloat fmax(const BigFloat& a, const BigFloat& b) { return binop(mpfr_max, a, b); }
    friend BigFloat fmin(const BigFloat& a, const BigFloat& b) { return binop(mpfr_min, a, b); }
    friend bool isfinite(const BigFloat& a) { return mpfr_number_p(a.v_) != 0; }
    friend bool isnan(const BigFloat& a) { return mpfr_nan_p(a.v_) != 0; }

    std::string str(int digits = 0) const {
        char* s = nullptr;
        mpfr_asprintf(&s, digits > 0 ? ("%." + std::to_string(digits) + "Rg").c_str() : "%Rg", v_);
        std::string out(s);
        mpfr_free_str(s);
        return out;
    }

  private:
    template <class F>
    static BigFloat binop(F f, const BigFloat& a, const BigFloat& b) {
        BigFloat r;
        f(r.v_, a.v_, b.v_, MPFR_RNDN);
        return r;
    }
    template <class F>
    static BigFloat unop(F f, const BigFloat& a) {
        BigFloat r;
        f(r.v_, a.v_, MPFR_RNDN);
        return r;
    }

    mpfr_t v_;
};

} // namespace parabolica
