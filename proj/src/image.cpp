#include "terrasurf/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace terrasurf {

namespace {

// Skips whitespace and '#' comment lines, then reads one unsigned integer
// token. Returns false on EOF/garbage.
bool next_pnm_int(std::istream& in, long& out) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n')
                c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c))
        return false;
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = in.get();
    }
    if (c != EOF)
        in.unget();
    out = v;
    return true;
}

struct PnmHeader {
    int magic = 0; // 2 or 5
    int width = 0;
    int height = 0;
    long maxval = 0;
};

PnmHeader read_pgm_header(std::istream& in, const std::string& path) {
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || (m1 != '2' && m1 != '5'))
        throw PgmError(PgmErrorKind::MalformedHeader, path + ": not a P2/P5 PGM");
    PnmHeader h;
    h.magic = m1 - '0';
    long w = 0, ht = 0, mv = 0;
    if (!next_pnm_int(in, w) || !next_pnm_int(in, ht) || !next_pnm_int(in, mv))
        throw PgmError(PgmErrorKind::MalformedHeader, path + ": incomplete PGM header");
    if (w < 1 || ht < 1)
        throw PgmError(PgmErrorKind::MalformedHeader, path + ": non-positive dimensions");
    if (mv != 255 && mv != 65535)
        throw PgmError(PgmErrorKind::UnsupportedMaxval,
                       path + ": maxval " + std::to_string(mv) + " unsupported (need 255 or 65535)");
    h.width = static_cast<int>(w);
    h.height = static_cast<int>(ht);
    h.maxval = mv;
    return h;
}

// Reads the sample payload after the header; P5 binary (16-bit big-endian)
// or P2 ASCII. Values are returned unscaled.
std::vector<long> read_pgm_samples(std::istream& in, const PnmHeader& h, const std::string& path) {
    const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
    std::vector<long> raw(n);
    if (h.magic == 5) {
        int c = in.get(); // single whitespace byte after maxval
        if (c == EOF)
            throw PgmError(PgmErrorKind::TruncatedPayload, path + ": missing pixel data");
        const int bytes = h.maxval > 255 ? 2 : 1;
        std::vector<unsigned char> buf(n * bytes);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size())
            throw PgmError(PgmErrorKind::TruncatedPayload,
                           path + ": expected " + std::to_string(buf.size()) + " payload bytes, got " +
                               std::to_string(in.gcount()));
        for (std::size_t i = 0; i < n; ++i)
            raw[i] = bytes == 2 ? (static_cast<long>(buf[2 * i]) << 8) | buf[2 * i + 1] : buf[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            long v;
            if (!next_pnm_int(in, v))
                throw PgmError(PgmErrorKind::TruncatedPayload,
                               path + ": ASCII payload ends after " + std::to_string(i) + " of " +
                                   std::to_string(n) + " samples");
            raw[i] = v;
        }
    }
    for (long v : raw)
        if (v > h.maxval)
            throw PgmError(PgmErrorKind::MalformedHeader, path + ": sample exceeds maxval");
    return raw;
}

} // namespace

GrayImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw PgmError(PgmErrorKind::Io, path + ": cannot open");
    const PnmHeader h = read_pgm_header(in, path);
    const std::vector<long> raw = read_pgm_samples(in, h, path);
    GrayImage img(h.width, h.height);
    const double inv = 1.0 / static_cast<double>(h.maxval);
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.data[i] = static_cast<double>(raw[i]) * inv;
    return img;
}

void save_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw PgmError(PgmErrorKind::Io, path + ": cannot open for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> buf(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        buf[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw PgmError(PgmErrorKind::Io, path + ": write failed");
}

std::vector<int> load_pgm_raw(const std::string& path, int& width, int& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw PgmError(PgmErrorKind::Io, path + ": cannot open");
    const PnmHeader h = read_pgm_header(in, path);
    const std::vector<long> raw = read_pgm_samples(in, h, path);
    width = h.width;
    height = h.height;
    return std::vector<int>(raw.begin(), raw.end());
}

void save_pgm_raw(const std::vector<int>& values, int width, int height, int maxval,
                  const std::string& path) {
    if (maxval < 1 || maxval > 255)
        throw std::invalid_argument("save_pgm_raw: maxval must be in [1,255]");
    if (values.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("save_pgm_raw: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw PgmError(PgmErrorKind::Io, path + ": cannot open for writing");
    out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
    std::vector<unsigned char> buf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const int v = std::clamp(values[i], 0, maxval);
        buf[i] = static_cast<unsigned char>(v);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw PgmError(PgmErrorKind::Io, path + ": write failed");
}

IntegralImage integral(const GrayImage& img) {
    IntegralImage ii;
    ii.width = img.width;
    ii.height = img.height;
    ii.cumsum.resize(img.data.size());
    for (int y = 0; y < img.height; ++y) {
        double row = 0.0;
        for (int x = 0; x < img.width; ++x) {
            row += img.at(x, y);
            const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
            ii.cumsum[i] = row + (y > 0 ? ii.cumsum[i - img.width] : 0.0);
        }
    }
    return ii;
}

double box_sum(const IntegralImage& ii, const Rect& r) {
    const int x0 = std::max(r.x0, 0);
    const int y0 = std::max(r.y0, 0);
    const int x1 = std::min(r.x1, ii.width - 1);
    const int y1 = std::min(r.y1, ii.height - 1);
    if (x0 > x1 || y0 > y1)
        return 0.0;
    return ii.at(x1, y1) - ii.at(x0 - 1, y1) - ii.at(x1, y0 - 1) + ii.at(x0 - 1, y0 - 1);
}

double haar_x(const IntegralImage& ii, int cx, int cy, int size) {
    const int half = size / 2;
    const int y0 = cy - half, y1 = cy + half - 1;
    const double left = box_sum(ii, {cx - half, y0, cx - 1, y1});
    const double right = box_sum(ii, {cx, y0, cx + half - 1, y1});
    return right - left;
}

double haar_y(const IntegralImage& ii, int cx, int cy, int size) {
    const int half = size / 2;
    const int x0 = cx - half, x1 = cx + half - 1;
    const double top = box_sum(ii, {x0, cy - half, x1, cy - 1});
    const double bottom = box_sum(ii, {x0, cy, x1, cy + half - 1});
    return bottom - top;
}

} // namespace terrasurf
