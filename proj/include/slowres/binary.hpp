#pragma once

// Minimal host-endian binary stream helpers shared by the weight and model bundles.

#include "slowres/error.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace slowres::binary {

template <class T>
void put(std::ostream& os, const T& v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is)
{
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error(ErrorKind::Io, "truncated binary bundle");
    return v;
}

inline void put_string(std::ostream& os, const std::string& s)
{
    put<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is)
{
    const auto n = get<std::uint64_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw Error(ErrorKind::Io, "truncated binary bundle");
    return s;
}

inline void put_vector(std::ostream& os, const Eigen::VectorXd& v)
{
    put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline Eigen::VectorXd get_vector(std::istream& is)
{
    const auto n = get<std::uint64_t>(is);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw Error(ErrorKind::Io, "truncated binary bundle");
    return v;
}

inline void expect_magic(std::istream& is, const char (&magic)[5])
{
    char got[4]{};
    is.read(got, 4);
    if (!is || std::string(got, 4) != std::string(magic, 4))
        throw Error(ErrorKind::Io, std::string("bad bundle magic, expected ") + magic);
}

} // namespace slowres::binary
