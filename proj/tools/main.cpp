#include <cstdio>

int main() {
    std::puts("colddamp cli placeholder");
    return 0;
}
